"""Empirical verification of the isometry hypotheses.

Covers three objects:
  * strong-RIP extremes of a matrix A over row subsets with |I| >= m/2,
    for a fixed vector (exact) and profiled over random sparse vectors;
  * the lifted linear map H' -> (a_j^H H a_j + 2 Re(conj(b_j) a_j^H h))_j
    on augmented Hermitian matrices, and the l1/Frobenius ratio band it
    attains on the structured rank-2 row-sparse class;
  * the exact cross-term supremum sup { sum_j b_j <a_j, x> : ||x||=1,
    ||x||_0 <= k }.

Estimates are reported as observed extremes with reproducible witnesses,
never as certified bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .rng import SeedSpec


@dataclass
class RipEstimate:
    lower_hat: float
    upper_hat: float
    samples: int
    witness_lower: object
    witness_upper: object
    config: dict = dc_field(default_factory=dict)


def srip_extremes_for_x(A, x) -> tuple[float, float]:
    """Exact (min, max) of ||A_I x||^2 / ||x||^2 over subsets |I| >= m/2.

    The squared row responses are nonnegative, so the max takes every row
    and the min keeps the ceil(m/2) smallest.
    """
    A = np.asarray(A)
    x = np.asarray(x)
    nx2 = float(np.real(np.vdot(x, x)))
    if nx2 == 0.0:
        raise ValueError("x must be nonzero")
    sq = np.abs(A @ x) ** 2
    keep = math.ceil(A.shape[0] / 2)
    part = np.partition(sq, keep - 1)
    low = float(np.sum(part[:keep]))
    high = float(np.sum(sq))
    return low / nx2, high / nx2


def _sparse_extremes(A, support, values, keep):
    sq = np.abs(A[:, support] @ values) ** 2
    nx2 = float(np.real(np.vdot(values, values)))
    part = np.partition(sq, keep - 1)
    return float(np.sum(part[:keep])) / nx2, float(np.sum(sq)) / nx2


def srip_profile(
    A,
    k: int,
    trials: int,
    seed: SeedSpec,
    last_coord_free: bool = False,
    refine_swaps: int = 50,
) -> RipEstimate:
    """Monte Carlo profile of the strong-RIP extremes over unit k-sparse x.

    Each trial draws a Gaussian-amplitude k-sparse vector and then greedily
    tries coordinate swaps (up to ``refine_swaps``, split between pushing
    the lower extreme down and the upper extreme up).  With
    ``last_coord_free`` the final coordinate is always active on top of the
    k-sparse head, matching augmented matrices [A b] whose appended
    coordinate is unrestricted.

    Per-trial streams are derived from ``seed``, so extending ``trials``
    under the same seed only adds samples: the lower estimate is
    nonincreasing and the upper nondecreasing in ``trials``.
    """
    A = np.asarray(A)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    m, n = A.shape
    head = n - 1 if last_coord_free else n
    if not 1 <= k <= head:
        raise ValueError(f"need 1 <= k <= {head}, got k={k}")
    keep = math.ceil(m / 2)
    complex_field = np.iscomplexobj(A)

    best_low = math.inf
    best_high = -math.inf
    wit_low = wit_high = None

    def draw_values(rng, size):
        if complex_field:
            return rng.standard_normal(size) + 1j * rng.standard_normal(size)
        return rng.standard_normal(size)

    for t in range(trials):
        rng = seed.child("srip", t).rng()
        support = np.sort(rng.choice(head, size=k, replace=False))
        if last_coord_free:
            support = np.append(support, head)
        values = draw_values(rng, support.size)
        base = (support.copy(), values.copy())

        for target in ("low", "high"):
            support, values = base[0].copy(), base[1].copy()
            low, high = _sparse_extremes(A, support, values, keep)
            score = low if target == "low" else high
            for _ in range(refine_swaps // 2):
                swap_pos = int(rng.integers(0, k))
                candidates = np.setdiff1d(np.arange(head), support[:k] if last_coord_free else support)
                if candidates.size == 0:
                    break
                new_idx = int(candidates[rng.integers(0, candidates.size)])
                trial_support = support.copy()
                trial_support[swap_pos] = new_idx
                trial_values = values.copy()
                trial_values[swap_pos] = draw_values(rng, 1)[0]
                lo2, hi2 = _sparse_extremes(A, trial_support, trial_values, keep)
                cand_score = lo2 if target == "low" else hi2
                better = cand_score < score if target == "low" else cand_score > score
                if better:
                    support, values, score = trial_support, trial_values, cand_score
                    low, high = lo2, hi2
            vec = np.zeros(n, dtype=A.dtype)
            vec[support] = values
            if target == "low" and low < best_low:
                best_low = low
                wit_low = vec / np.linalg.norm(vec)
            if target == "high" and high > best_high:
                best_high = high
                wit_high = vec / np.linalg.norm(vec)

    return RipEstimate(
        lower_hat=best_low,
        upper_hat=best_high,
        samples=trials,
        witness_lower=wit_low,
        witness_upper=wit_high,
        config={
            "k": k,
            "subset_fraction": 0.5,
            "last_coord_free": last_coord_free,
            "refine_swaps": refine_swaps,
        },
    )


def lifted_map_apply(A, b, H, h) -> np.ndarray:
    """Entries of the lifted map on H' = [[H, h], [h^H, 0]].

    Returns (a_j^H H a_j + 2 Re(conj(b_j) (a_j^H h)))_j, where row j of A
    is a_j^H.  The bias enters conjugated so that the rank-one case
    H = x x^H, h = x reproduces |<a_j, x> + b_j|^2 - |b_j|^2 for every
    complex bias, consistent with the forward model.
    """
    A = np.asarray(A)
    b = np.asarray(b)
    H = np.asarray(H)
    h = np.asarray(h)
    m, n = A.shape
    if H.shape != (n, n) or h.shape != (n,) or b.shape != (m,):
        raise ValueError("dimension mismatch")
    scale = max(1.0, float(np.max(np.abs(H))) if H.size else 0.0)
    if float(np.max(np.abs(H - H.conj().T))) > 1e-12 * scale:
        raise ValueError("H must be Hermitian")
    quad = np.einsum("ij,jk,ik->i", A, H, A.conj())
    cross = 2.0 * np.real(np.conj(b) * (A @ h))
    out = quad + cross
    if np.iscomplexobj(out):
        if float(np.max(np.abs(out.imag))) > 1e-10 * max(1.0, float(np.max(np.abs(out)))):
            raise ValueError("lifted map produced non-real output on Hermitian input")
        out = out.real
    return np.asarray(out, dtype=np.float64)


def _structured_ratio(A, b, x, z):
    """l1/Frobenius ratio for H = x x^H - z z^H, h = x - z, via matvecs."""
    m = A.shape[0]
    h = x - z
    ax = A @ x
    az = A @ z
    vals = np.abs(ax) ** 2 - np.abs(az) ** 2 + 2.0 * np.real(np.conj(b) * (A @ h))
    xx = float(np.real(np.vdot(x, x)))
    zz = float(np.real(np.vdot(z, z)))
    xz = abs(complex(np.vdot(x, z))) ** 2
    frob2 = xx**2 + zz**2 - 2.0 * xz + 2.0 * float(np.real(np.vdot(h, h)))
    if frob2 <= 0:
        return None, 0.0
    frob = math.sqrt(frob2)
    return float(np.sum(np.abs(vals))) / (m * frob), frob


def rip_ratio_sample(A, b, k: int, trials: int, seed: SeedSpec) -> RipEstimate:
    """Sampled (1/m)||A'(H')||_1 / ||H'||_F ratios over the structured class.

    Draws k-sparse x and z with both shared and disjoint supports, forms
    the rank <= 2 difference H = x x^H - z z^H with h = x - z, and records
    the observed ratio extremes with witnesses.  Draws with ||H'||_F below
    1e-12 are skipped.
    """
    A = np.asarray(A)
    b = np.asarray(b)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    m, n = A.shape
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}")
    complex_field = np.iscomplexobj(A)

    best_low = math.inf
    best_high = -math.inf
    wit_low = wit_high = None
    used = 0

    for t in range(trials):
        rng = seed.child("ripmap", t).rng()
        shared = bool(rng.integers(0, 2))
        sup_x = rng.choice(n, size=k, replace=False)
        if shared:
            sup_z = sup_x
        else:
            sup_z = rng.choice(n, size=k, replace=False)

        def draw(sup):
            v = np.zeros(n, dtype=A.dtype)
            if complex_field:
                v[sup] = rng.standard_normal(k) + 1j * rng.standard_normal(k)
            else:
                v[sup] = rng.standard_normal(k)
            return v

        x = draw(sup_x)
        z = draw(sup_z)
        ratio, frob = _structured_ratio(A, b, x, z)
        if ratio is None or frob < 1e-12:
            continue
        used += 1
        if ratio < best_low:
            best_low = ratio
            wit_low = (x, z)
        if ratio > best_high:
            best_high = ratio
            wit_high = (x, z)

    if used == 0:
        raise ValueError("all sampled H' were degenerate")
    return RipEstimate(
        lower_hat=best_low,
        upper_hat=best_high,
        samples=used,
        witness_lower=wit_low,
        witness_upper=wit_high,
        config={"k": k, "trials": trials},
    )


def structured_ratio(A, b, x, z) -> float:
    """Ratio for one witness pair; used to re-verify RipEstimate extremes."""
    ratio, frob = _structured_ratio(np.asarray(A), np.asarray(b), np.asarray(x), np.asarray(z))
    if ratio is None or frob < 1e-12:
        raise ValueError("degenerate witness")
    return ratio


def crossterm_sup(A, b, k: int) -> float:
    """Exact sup of sum_j b_j <a_j, x> over unit-norm k-sparse real x.

    For a fixed support S the supremum is ||(A^T b)_S||_2, so the top-k
    magnitudes of A^T b are exact.
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if A.ndim != 2 or b.shape != (A.shape[0],):
        raise ValueError("dimension mismatch")
    if not 1 <= k <= A.shape[1]:
        raise ValueError(f"need 1 <= k <= n, got k={k}")
    corr = np.abs(A.T @ b)
    top = np.partition(corr, A.shape[1] - k)[A.shape[1] - k :]
    return float(np.sqrt(np.sum(top**2)))
