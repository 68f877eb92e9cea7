"""Constructive oracles and Monte Carlo checkers for the supporting lemmas.

* ``sparse_convex_decompose`` writes any vector with ||v||_inf <= theta and
  ||v||_1 <= k*theta as a convex combination of k-sparse atoms bounded by
  theta in sup norm and by ||v||_1 in l1 norm.
* ``lifted_distance_check`` evaluates the rank-one lifting inequality
  ||u u^H - v v^H||_F >= ||u|| ||u - v|| / sqrt(2) for phase-aligned pairs.
* ``moment_bound_check`` verifies the two-sided expectation bounds on
  |a^H H a + 2 Re(b a^H h)| for complex Gaussian a by Monte Carlo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import SeedSpec


@dataclass
class SparseDecomposition:
    weights: list
    atoms: list
    k: int
    theta: float


def check_decomposition(dec: SparseDecomposition, v, k: int, theta: float) -> None:
    """Independent validator for decomposition invariants; raises on failure."""
    v = np.asarray(v, dtype=np.float64)
    w = np.asarray(dec.weights, dtype=np.float64)
    if np.any(w < -1e-15) or np.any(w > 1.0 + 1e-12):
        raise AssertionError("weights outside [0, 1]")
    if abs(float(np.sum(w)) - 1.0) > 1e-12:
        raise AssertionError("weights do not sum to 1")
    l1_v = float(np.sum(np.abs(v)))
    recon = np.zeros_like(v)
    for lam, atom in zip(w, dec.atoms):
        atom = np.asarray(atom, dtype=np.float64)
        if int(np.count_nonzero(atom)) > k:
            raise AssertionError("atom not k-sparse")
        if float(np.max(np.abs(atom), initial=0.0)) > theta * (1.0 + 1e-12):
            raise AssertionError("atom exceeds sup-norm budget")
        if float(np.sum(np.abs(atom))) > l1_v * (1.0 + 1e-12) + 1e-15:
            raise AssertionError("atom exceeds l1 budget")
        recon = recon + lam * atom
    if float(np.max(np.abs(recon - v), initial=0.0)) > 1e-10:
        raise AssertionError("atoms do not reconstruct v")


def sparse_convex_decompose(v, k: int, theta: float) -> SparseDecomposition:
    """Decompose v into a convex combination of k-sparse bounded atoms.

    Requires ||v||_inf <= theta and ||v||_1 <= k*theta.  Greedy peeling:
    while the remainder has more than k nonzeros, peel a saturated top-k
    atom carrying the full l1 mass and take the largest weight keeping the
    rescaled remainder inside the constraint polytope.  Each step either
    zeroes a coordinate for good or pins one at theta for good, so at most
    2n atoms are emitted (a hard counter enforces this).
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError("v must be 1-d")
    if theta <= 0:
        raise ValueError("theta must be positive")
    if k < 1:
        raise ValueError("k must be >= 1")
    n = v.size
    sup = float(np.max(np.abs(v), initial=0.0))
    l1 = float(np.sum(np.abs(v)))
    if sup > theta * (1.0 + 1e-12):
        raise ValueError("precondition ||v||_inf <= theta violated")
    if l1 > k * theta * (1.0 + 1e-12):
        raise ValueError("precondition ||v||_1 <= k*theta violated")

    signs = np.where(v < 0, -1.0, 1.0)
    # Work on the unscaled remainder w = mu * rho: its update is a pure
    # subtraction, so no 1/(1-lam) error amplification when lam -> 1.
    w = np.abs(v)
    mu = 1.0
    weights: list[float] = []
    atoms: list[np.ndarray] = []

    for _ in range(2 * n + 1):
        nz = np.count_nonzero(w)
        if nz <= k:
            break
        order = np.argsort(-w, kind="stable")
        # Atom mass equals the remainder's per-unit-weight l1 exactly; any
        # gap between the two would amplify through 1/(1-lam) at large lam.
        L = float(np.sum(w)) / mu
        j_full = int(min(math.floor(L / theta + 1e-12), k))
        c = L - j_full * theta
        if c < 0.0:
            j_full -= 1
            c = L - j_full * theta
        if c > theta:
            c = theta
        atom_mag = np.zeros(n)
        atom_mag[order[:j_full]] = theta
        partial_idx = None
        if c > 1e-15 * theta and j_full < k:
            partial_idx = int(order[j_full])
            atom_mag[partial_idx] = c

        # Largest weight keeping the rescaled remainder inside the polytope.
        rho = w / mu
        caps = []
        if j_full:
            caps.append(float(rho[order[j_full - 1]]) / theta)
        if partial_idx is not None:
            caps.append(rho[partial_idx] / c)
            if c < theta:
                caps.append((theta - rho[partial_idx]) / (theta - c))
        tail_start = j_full + (1 if partial_idx is not None else 0)
        if tail_start < nz:
            caps.append(1.0 - rho[order[tail_start]] / theta)
        lam = min(caps)
        if not 0.0 < lam < 1.0:
            raise RuntimeError(f"peeling stalled (lam={lam}); implementation bug")

        weights.append(lam * mu)
        atoms.append(signs * atom_mag)
        mu_prev = mu
        w = w - (lam * mu) * atom_mag
        mu *= 1.0 - lam
        # Snap coordinates the binding cap drove to a boundary; rounding in
        # the subtraction lives on the pre-update scale.
        snap = 1e-13 * mu_prev * theta
        w[np.abs(w) <= snap] = 0.0
        cap = mu * theta
        w[np.abs(w - cap) <= snap] = cap
        if np.any(w < -snap) or np.any(w > cap + snap):
            raise RuntimeError("peeling left the constraint polytope; implementation bug")
        np.clip(w, 0.0, cap, out=w)
        # Boundary snaps can nudge the remainder mass above the l1 budget;
        # repair on strictly interior coordinates so saturated ones stay
        # saturated (otherwise they would be re-raised step after step).
        excess = float(np.sum(w)) - l1 * mu
        if excess > 0.0:
            interior = (w > 0.0) & (w < cap)
            pool = float(np.sum(w[interior]))
            if pool >= excess:
                w[interior] *= (pool - excess) / pool
            else:
                w *= l1 * mu / float(np.sum(w))
    else:
        raise RuntimeError("termination bound exceeded; implementation bug")

    last = np.minimum(w / mu, theta)
    mass = float(np.sum(last))
    if mass > l1 > 0:
        last *= l1 / mass
    weights.append(1.0 - float(np.sum(weights)))
    atoms.append(signs * last)
    dec = SparseDecomposition(weights=weights, atoms=atoms, k=k, theta=theta)
    check_decomposition(dec, v, k, theta)
    return dec


def phase_align(u, v) -> np.ndarray:
    """Rotate v by a global phase so that <u, v> is real and nonnegative."""
    u = np.asarray(u)
    v = np.asarray(v)
    inner = complex(np.vdot(u, v))
    if inner == 0:
        return v.copy()
    if not (np.iscomplexobj(u) or np.iscomplexobj(v)):
        return v.copy() if inner.real > 0 else -v
    return v * np.exp(-1j * np.angle(inner))


def lifted_distance_check(u, v) -> tuple[float, float, bool]:
    """Both sides of ||u u^H - v v^H||_F >= ||u|| ||u - v|| / sqrt(2).

    Requires <u, v> real nonnegative (use ``phase_align`` first).  The left
    side uses the closed form ||u||^4 + ||v||^4 - 2|<u,v>|^2, avoiding the
    n x n outer products.
    """
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape:
        raise ValueError("u and v must have equal length")
    inner = complex(np.vdot(u, v))
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    scale = max(1.0, nu * nv)
    if inner.real < -1e-12 * scale or abs(inner.imag) > 1e-12 * scale:
        raise ValueError("precondition <u, v> >= 0 violated; phase-align first")
    lhs_sq = nu**4 + nv**4 - 2.0 * abs(inner) ** 2
    lhs = math.sqrt(max(lhs_sq, 0.0))
    rhs = nu * float(np.linalg.norm(u - v)) / math.sqrt(2.0)
    holds = lhs >= rhs - 1e-9 * max(1.0, nu**2, nv**2)
    return lhs, rhs, holds


def batch_lifted_distance_check(U, V) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized lifted_distance_check over rows of pre-aligned U, V."""
    U = np.asarray(U)
    V = np.asarray(V)
    inner = np.sum(np.conj(U) * V, axis=1)
    nu2 = np.sum(np.abs(U) ** 2, axis=1)
    nv2 = np.sum(np.abs(V) ** 2, axis=1)
    lhs = np.sqrt(np.maximum(nu2**2 + nv2**2 - 2.0 * np.abs(inner) ** 2, 0.0))
    rhs = np.sqrt(nu2) * np.sqrt(np.sum(np.abs(U - V) ** 2, axis=1)) / math.sqrt(2.0)
    holds = lhs >= rhs - 1e-9 * np.maximum.reduce([np.ones_like(nu2), nu2, nv2])
    return lhs, rhs, holds


def moment_bounds(H, h, b) -> tuple[float, float]:
    """Closed-form lower/upper bounds on E|a^H H a + 2 Re(b a^H h)|."""
    H = np.asarray(H)
    h = np.asarray(h)
    frob2 = float(np.real(np.sum(np.abs(H) ** 2)))
    hn2 = float(np.real(np.vdot(h, h)))
    b2 = abs(b) ** 2
    lower = math.sqrt(frob2 + b2 * hn2) / 3.0
    upper = 2.0 * math.sqrt(3.0 * frob2 + b2 * hn2)
    return lower, upper


def moment_bound_check(
    H, h, b, samples: int, seed: SeedSpec
) -> tuple[float, float, float, bool]:
    """Monte Carlo estimate of E|a^H H a + 2 Re(b a^H h)| against its bounds.

    ``a`` is a standard complex Gaussian vector (E|a_i|^2 = 1).  Returns
    (mc_mean, lower, upper, holds_ci) where holds_ci allows a 5-sigma
    confidence radius on both sides.  The bias enters through |b|; H must
    be Hermitian with rank <= 2 (third singular value below 1e-8).
    """
    H = np.asarray(H, dtype=np.complex128)
    h = np.asarray(h, dtype=np.complex128)
    if samples < 1000:
        raise ValueError("need at least 1e3 samples")
    n = H.shape[0]
    if H.shape != (n, n) or h.shape != (n,):
        raise ValueError("dimension mismatch")
    if float(np.max(np.abs(H - H.conj().T), initial=0.0)) > 1e-10 * max(
        1.0, float(np.max(np.abs(H), initial=0.0))
    ):
        raise ValueError("H must be Hermitian")
    svals = np.linalg.svd(H, compute_uv=False)
    if n > 2 and svals[2] > 1e-8 * max(1.0, svals[0]):
        raise ValueError("rank(H) must be <= 2")
    babs = abs(b)
    lower, upper = moment_bounds(H, h, babs)

    # Reduce to the eigenbasis of H so each sample costs O(1) after an
    # (samples x 3) Gaussian projection.
    evals, evecs = np.linalg.eigh(H)
    idx = list(np.argsort(-np.abs(evals))[:2])
    lam = [float(evals[i]) for i in idx] + [0.0] * (2 - len(idx))
    basis = [evecs[:, i] for i in idx]
    h_par = [complex(np.vdot(u, h)) for u in basis] + [0j] * (2 - len(idx))
    h_perp = h - sum(c * u for c, u in zip(h_par, basis))
    h_perp_norm = float(np.linalg.norm(h_perp))

    rng = seed.rng()
    total = 0.0
    total_sq = 0.0
    done = 0
    chunk = 200_000
    while done < samples:
        cnt = min(chunk, samples - done)
        g = (
            rng.standard_normal((cnt, 3)) + 1j * rng.standard_normal((cnt, 3))
        ) / math.sqrt(2.0)
        xi = (
            lam[0] * np.abs(g[:, 0]) ** 2
            + lam[1] * np.abs(g[:, 1]) ** 2
            + 2.0
            * babs
            * np.real(
                np.conj(g[:, 0]) * h_par[0]
                + np.conj(g[:, 1]) * h_par[1]
                + np.conj(g[:, 2]) * h_perp_norm
            )
        )
        a = np.abs(xi)
        total += float(np.sum(a))
        total_sq += float(np.sum(a**2))
        done += cnt
    mean = total / samples
    var = max(total_sq / samples - mean**2, 0.0)
    radius = 5.0 * math.sqrt(var / samples)
    holds = (mean + radius >= lower - radius) and (mean - radius <= upper + radius)
    return mean, lower, upper, holds
