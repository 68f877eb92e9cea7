"""Recovery engine: l1 inner solver with an l2-ball data constraint, wrapped
in alternating sign (real) or phase (complex) outer loops.

The inner problem is basis pursuit denoising,

    min ||x||_1  s.t.  ||D x - c||_2 <= eps,

solved by ADMM on the splitting x = z, D x = r with an exact x-update
(the normal-equation factor is penalty-independent, so the self-adaptive
penalty costs nothing).  The outer loops exploit the identity

    ||diag(s)(A x + b) - y||_2 = ||A x - (s*y - b)||_2

for any unit-modulus s, so each outer step is one convex BPDN solve.

A plain alternation traps immediately in the underdetermined regime: with
eps = 0 and m < n every sign pattern admits an exact interpolator, so every
start is a one-step fixed point.  Each restart therefore runs a burn-in
first: a proximal-gradient homotopy on the penalized objective
0.5 ||A x - (s*y - b)||^2 + lam ||x||_1 with the sign pattern refreshed at
every step and lam shrunk geometrically, entering the constrained
alternation only once the support has formed.  Burn-in gradients drop
measurements whose current magnitude is far below the observation
(their sign estimate carries no information yet), and the real-field
solver finishes with a margin-guided single-sign-flip descent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from itertools import combinations

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .model import COMPLEX, REAL, MeasurementEnsemble, lifted_intensity
from .rng import SeedSpec


@dataclass(frozen=True)
class SolverOptions:
    outer_max: int = 100
    inner_max: int = 2000
    inner_tol: float = 1e-9
    restarts: int = 10
    penalty: float = 1.0
    success_tol: float = 1e-5
    mode: str = "magnitude"
    restart_seed: int = 0
    homotopy_shrink: float = 0.9
    homotopy_steps: int = 8
    trust_ratio: float = 5.0
    flip_candidates: int = 6

    def __post_init__(self):
        if min(self.outer_max, self.inner_max, self.restarts) < 1:
            raise ValueError("iteration and restart counts must be >= 1")
        if self.inner_tol <= 0 or self.penalty <= 0 or self.success_tol <= 0:
            raise ValueError("tolerances and penalty must be positive")
        if not 0 < self.homotopy_shrink < 1:
            raise ValueError("homotopy_shrink must lie in (0, 1)")
        if self.homotopy_steps < 1 or self.flip_candidates < 0:
            raise ValueError("homotopy_steps must be >= 1, flip_candidates >= 0")
        if self.mode not in ("magnitude", "intensity"):
            raise ValueError(f"unknown solver mode {self.mode!r}")


@dataclass
class BpdnResult:
    x: np.ndarray
    iterations: int
    converged: bool
    primal_residual: float
    dual_residual: float

    @property
    def objective(self) -> float:
        return float(np.sum(np.abs(self.x)))


@dataclass
class SolveReport:
    xhat: np.ndarray
    objective: float
    feasibility: float
    outer_iters: int
    inner_iters_total: int
    restart_index_of_best: int
    termination: str  # sign_fixed_point | max_outer | infeasible_inner
    trace: list = dc_field(default_factory=list)
    clipped_intensities: int = 0


def _soft_threshold(v: np.ndarray, kappa: float) -> np.ndarray:
    mag = np.abs(v)
    scale = np.maximum(mag - kappa, 0.0)
    if np.iscomplexobj(v):
        out = np.zeros_like(v)
        nz = mag > 0
        out[nz] = v[nz] * (scale[nz] / mag[nz])
        return out
    return np.sign(v) * scale


def _project_ball(v: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    d = v - center
    nrm = np.linalg.norm(d)
    if nrm <= radius:
        return v
    if radius == 0.0:
        return center.copy()
    return center + d * (radius / nrm)


_ADAPT_PERIOD = 10
_ADAPT_FREEZE = 1000  # rho changes after this iteration can cycle; freeze instead


def _polish_key(D, c, epsilon, feas_tol, v):
    violation = max(float(np.linalg.norm(D @ v - c)) - epsilon - feas_tol, 0.0)
    return violation, float(np.sum(np.abs(v)))


def _whiten_equality(D, c):
    """Equivalent orthonormal-row system for the constraint D x = c.

    D x = c iff V^H x = S^-1 U^H c for the thin SVD D = U S V^H (restricted
    to nonnegligible singular values), and ADMM's rate no longer depends on
    cond(D).  Only valid for epsilon = 0; returns None when c has mass
    outside the retained range (infeasible or near-deficient systems fall
    back to the raw constraint).
    """
    try:
        U, s, Vh = np.linalg.svd(D, full_matrices=False)
    except np.linalg.LinAlgError:
        return None
    if s.size == 0 or s[0] == 0.0:
        return None
    keep = s > 1e-12 * s[0]
    proj = U[:, keep].conj().T @ c
    dropped = c - U[:, keep] @ proj
    if np.linalg.norm(dropped) > 1e-9 * (1.0 + np.linalg.norm(c)):
        return None
    return Vh[keep, :], proj / s[keep]


def bpdn(D, c, epsilon: float, opts: SolverOptions | None = None, x_init=None) -> BpdnResult:
    """Approximate minimizer of min ||x||_1 s.t. ||D x - c||_2 <= epsilon.

    Returns the best iterate with a convergence flag; on nonunique optima
    any minimizer may be returned, so callers should contract on the
    objective value rather than the witness.  The ADMM iterate is polished
    by a least-squares refit on its support, kept only when it improves the
    (feasibility violation, objective) pair.
    """
    opts = opts or SolverOptions()
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    D = np.asarray(D)
    c = np.asarray(c)
    if D.ndim != 2 or c.shape != (D.shape[0],):
        raise ValueError("dimension mismatch between D and c")
    if np.iscomplexobj(c) and not np.iscomplexobj(D):
        raise ValueError("field mismatch between D and c")
    m, n = D.shape
    cnorm = float(np.linalg.norm(c))
    if epsilon >= cnorm:
        # 0 is feasible and l1-minimal.
        return BpdnResult(np.zeros(n, dtype=D.dtype), 0, True, 0.0, 0.0)

    D_orig, c_orig = D, c
    if epsilon == 0.0:
        whitened = _whiten_equality(D, c)
        if whitened is not None:
            D, c = whitened
            m = D.shape[0]

    Dh = D.conj().T
    gram = Dh @ D
    gram[np.diag_indices(n)] += 1.0
    factor = cho_factor(gram)

    dtype = np.promote_types(D.dtype, c.dtype)
    x = np.zeros(n, dtype=dtype) if x_init is None else np.asarray(x_init, dtype=dtype).copy()
    z = x.copy()
    r = _project_ball(D @ x, c, epsilon)
    u_z = np.zeros(n, dtype=dtype)
    u_r = np.zeros(m, dtype=dtype)
    rho = opts.penalty
    tol = opts.inner_tol * (1.0 + float(np.linalg.norm(c)))

    it = 0
    converged = False
    primal = dual = math.inf
    for it in range(1, opts.inner_max + 1):
        x = cho_solve(factor, (z - u_z) + Dh @ (r - u_r))
        Dx = D @ x
        z_old, r_old = z, r
        z = _soft_threshold(x + u_z, 1.0 / rho)
        r = _project_ball(Dx + u_r, c, epsilon)
        u_z = u_z + x - z
        u_r = u_r + Dx - r
        primal = math.sqrt(
            float(np.linalg.norm(x - z)) ** 2 + float(np.linalg.norm(Dx - r)) ** 2
        )
        dual = rho * float(np.linalg.norm((z - z_old) + Dh @ (r - r_old)))
        if primal <= tol and dual <= tol:
            converged = True
            break
        if it % _ADAPT_PERIOD == 0 and it <= _ADAPT_FREEZE:
            # Keep the residuals within a factor 10 of each other.
            if primal > 10.0 * dual and rho < 1e4:
                rho *= 2.0
                u_z *= 0.5
                u_r *= 0.5
            elif dual > 10.0 * primal and rho > 1e-4:
                rho *= 0.5
                u_z *= 2.0
                u_r *= 2.0

    feas_tol = 1e-9 * (1.0 + cnorm)
    scale = float(np.max(np.abs(z))) if z.size else 0.0
    support = np.flatnonzero(np.abs(z) > 1e-12 * max(1.0, scale))
    if support.size:
        sol, _, _, _ = np.linalg.lstsq(D_orig[:, support], c_orig, rcond=None)
        cand = np.zeros(n, dtype=dtype)
        cand[support] = sol
        if _polish_key(D_orig, c_orig, epsilon, feas_tol, cand) < _polish_key(
            D_orig, c_orig, epsilon, feas_tol, z
        ):
            z = cand
    return BpdnResult(z, it, converged, primal, dual)


def _phase_of(v: np.ndarray) -> np.ndarray:
    mag = np.abs(v)
    out = np.ones_like(v)
    nz = mag > 0
    out[nz] = v[nz] / mag[nz]
    return out


def _sign_of(v: np.ndarray) -> np.ndarray:
    s = np.sign(v)
    s[s == 0] = 1.0
    return s


def _unit_pattern(v: np.ndarray) -> np.ndarray:
    return _phase_of(v) if np.iscomplexobj(v) else _sign_of(v)


@dataclass
class _RestartOutcome:
    xhat: np.ndarray
    feasibility: float
    objective: float
    outer_iters: int
    inner_iters: int
    termination: str
    trace: list


def _homotopy_burn_in(A, b, y_target, u0, freeze_levels, opts):
    """Proximal-gradient homotopy that forms the support and sign pattern.

    Runs ISTA steps on 0.5 ||A x - (u*y - b)||^2 + lam ||x||_1 while the
    unit pattern u is refreshed from A x + b after every step, shrinking
    lam from its zero-solution threshold down by seven decades.  During the
    first ``freeze_levels`` homotopy levels u is pinned at u0 so random
    restarts explore distinct basins.  Residual entries whose current
    magnitude is below y/(1 + trust_ratio) are dropped: their pattern
    estimate is uninformative.
    """
    m, n = A.shape
    Ah = A.conj().T
    lip = float(np.linalg.norm(A, 2)) ** 2
    if lip == 0.0:
        return np.zeros(n, dtype=A.dtype), u0
    step = 1.0 / lip
    x = np.zeros(n, dtype=A.dtype)
    u = u0
    lam = float(np.max(np.abs(Ah @ (u * y_target - b)), initial=0.0))
    if lam == 0.0:
        return x, u
    lam_min = 1e-7 * lam
    level = 0
    while lam > lam_min:
        frozen = level < freeze_levels
        for _ in range(opts.homotopy_steps):
            v = A @ x + b
            if not frozen:
                u = _unit_pattern(v)
            resid = v - u * y_target
            if not frozen:
                resid = resid * (np.abs(v) >= y_target / (1.0 + opts.trust_ratio))
            x = _soft_threshold(x - step * (Ah @ resid), step * lam)
        lam *= opts.homotopy_shrink
        level += 1
    return x, _unit_pattern(A @ x + b)


def _run_restart(A, b, epsilon, opts, u0, freeze_levels, feas_fn, y_target):
    """Burn-in followed by the alternating constrained iteration.

    Regular outer steps use a capped inner budget (a wrong pattern in the
    overdetermined regime is infeasible and would burn the full budget);
    a candidate fixed point is confirmed with a full-tolerance solve.
    """
    complex_field = np.iscomplexobj(A)
    x, u = _homotopy_burn_in(A, b, y_target, u0, freeze_levels, opts)
    capped = SolverOptions(
        inner_max=min(600, opts.inner_max),
        inner_tol=opts.inner_tol,
        restarts=1,
        penalty=opts.penalty,
    )
    inner_total = 0
    trace = []
    termination = "max_outer"
    last_converged = True
    u_tol = min(1e-9, max(10.0 * opts.inner_tol, 1e-13))
    best_feas = math.inf
    best_obj = math.inf
    since_best = 0

    def is_fixed(u_new, u_old):
        if complex_field:
            return float(np.max(np.abs(u_new - u_old), initial=0.0)) <= u_tol
        return bool(np.array_equal(u_new, u_old))

    for _ in range(opts.outer_max):
        res = bpdn(A, u * y_target - b, epsilon, capped, x_init=x)
        inner_total += res.iterations
        last_converged = res.converged
        x = res.x
        u_new = _unit_pattern(A @ x + b)
        if is_fixed(u_new, u):
            res = bpdn(A, u * y_target - b, epsilon, opts, x_init=x)
            inner_total += res.iterations
            last_converged = res.converged
            x = res.x
            u_new = _unit_pattern(A @ x + b)
            trace.append((res.objective, feas_fn(x)))
            if is_fixed(u_new, u):
                termination = "sign_fixed_point"
                break
        else:
            trace.append((res.objective, feas_fn(x)))
        u = u_new
        # Under noise the pattern can dance on zero-margin measurements
        # without the solution improving; stop once progress stalls.
        obj, feas = trace[-1]
        improved = feas < best_feas * (1.0 - 1e-3) or obj < best_obj - 1e-6 * (1.0 + abs(best_obj))
        best_feas = min(best_feas, feas)
        best_obj = min(best_obj, obj)
        if improved:
            since_best = 0
        else:
            since_best += 1
            if since_best >= 5:
                break
    if not last_converged:
        termination = "infeasible_inner"
    return _RestartOutcome(
        xhat=x,
        feasibility=trace[-1][1],
        objective=trace[-1][0],
        outer_iters=len(trace),
        inner_iters=inner_total,
        termination=termination,
        trace=trace,
    )


def _violation(feas: float, epsilon: float, scale: float) -> float:
    # Residuals inside the inner solver's feasibility collar count as zero,
    # otherwise an iterate converged to tolerance loses to an exactly
    # interpolating garbage pattern.
    return max(feas - epsilon - 1e-8 * scale, 0.0)


def _flip_descent(A, b, y_target, epsilon, opts, outcome: _RestartOutcome, feas_fn):
    """Real-field local search: retry the lowest-margin sign flips.

    Probes run with a small iteration cap (a wrong flip in the
    overdetermined regime makes the inner problem infeasible, which would
    otherwise burn the whole inner budget); a probe that improves the
    (violation, objective) key is re-solved to full tolerance.
    """
    if opts.flip_candidates == 0:
        return outcome
    scale = 1.0 + float(np.linalg.norm(y_target))
    probe_opts = SolverOptions(
        inner_max=min(300, opts.inner_max),
        inner_tol=max(opts.inner_tol, 1e-7),
        restarts=1,
        penalty=opts.penalty,
    )
    x = outcome.xhat
    key = (_violation(outcome.feasibility, epsilon, scale), outcome.objective)
    v = A @ x + b
    s = _sign_of(v)
    order = np.argsort(np.abs(v))
    inner = outcome.inner_iters
    trace = list(outcome.trace)
    improved = False
    budget = 4 * opts.flip_candidates
    tried = 0
    pos = 0
    while tried < budget and pos < min(opts.flip_candidates, order.size):
        j = order[pos]
        pos += 1
        tried += 1
        s_try = s.copy()
        s_try[j] = -s_try[j]
        probe = bpdn(A, s_try * y_target - b, epsilon, probe_opts, x_init=x)
        inner += probe.iterations
        probe_key = (_violation(feas_fn(probe.x), epsilon, scale), probe.objective)
        if probe_key >= key:
            continue
        res = bpdn(A, s_try * y_target - b, epsilon, opts, x_init=probe.x)
        inner += res.iterations
        feas = feas_fn(res.x)
        cand_key = (_violation(feas, epsilon, scale), res.objective)
        if cand_key < key:
            x, key, improved = res.x, cand_key, True
            trace.append((res.objective, feas))
            v = A @ x + b
            s = _sign_of(v)
            order = np.argsort(np.abs(v))
            pos = 0
    if not improved:
        return _RestartOutcome(
            outcome.xhat,
            outcome.feasibility,
            outcome.objective,
            outcome.outer_iters,
            inner,
            outcome.termination,
            trace,
        )
    return _RestartOutcome(
        xhat=x,
        feasibility=trace[-1][1],
        objective=trace[-1][0],
        outer_iters=len(trace),
        inner_iters=inner,
        termination="sign_fixed_point" if key[0] == 0.0 else outcome.termination,
        trace=trace,
    )


_FREEZE_LEVELS = 12  # homotopy levels a random restart keeps its pattern pinned


def _solve_restarts(A, b, epsilon, opts, feas_fn, y_target):
    """Restart chains: bias-anchored fast path, then a slower homotopy from
    the same anchor, then frozen random patterns."""
    complex_field = np.iscomplexobj(A)
    rng = SeedSpec(opts.restart_seed & ((1 << 64) - 1), ("solver", "restarts")).rng()
    anchor = _unit_pattern(b)
    chains = [(anchor, 0, opts)]
    if opts.restarts >= 2:
        slow = SolverOptions(
            outer_max=opts.outer_max,
            inner_max=opts.inner_max,
            inner_tol=opts.inner_tol,
            restarts=1,
            penalty=opts.penalty,
            success_tol=opts.success_tol,
            mode=opts.mode,
            restart_seed=opts.restart_seed,
            homotopy_shrink=0.95,
            homotopy_steps=max(opts.homotopy_steps, 10),
            trust_ratio=3.0,
            flip_candidates=opts.flip_candidates,
        )
        chains.append((anchor, 0, slow))
    for _ in range(opts.restarts - len(chains)):
        if complex_field:
            chains.append((np.exp(2j * np.pi * rng.random(A.shape[0])), _FREEZE_LEVELS, opts))
        else:
            chains.append((rng.choice([-1.0, 1.0], size=A.shape[0]), _FREEZE_LEVELS, opts))
    outcomes = []
    for u0, freeze, chain_opts in chains:
        out = _run_restart(A, b, epsilon, chain_opts, u0, freeze, feas_fn, y_target)
        if not complex_field:
            out = _flip_descent(A, b, y_target, epsilon, opts, out, feas_fn)
        outcomes.append(out)
    return outcomes


def _select_report(outcomes, epsilon, scale: float = 1.0) -> SolveReport:
    # Lexicographic: smallest feasibility violation, then smallest objective.
    keys = [(_violation(o.feasibility, epsilon, scale), o.objective) for o in outcomes]
    best = min(range(len(outcomes)), key=lambda i: keys[i])
    o = outcomes[best]
    return SolveReport(
        xhat=o.xhat,
        objective=float(np.sum(np.abs(o.xhat))),
        feasibility=o.feasibility,
        outer_iters=o.outer_iters,
        inner_iters_total=sum(r.inner_iters for r in outcomes),
        restart_index_of_best=best,
        termination=o.termination,
        trace=o.trace,
    )


def solve_affine_pr_real(
    ensemble: MeasurementEnsemble, y, epsilon: float, opts: SolverOptions | None = None
) -> SolveReport:
    """Recover a real signal from y = |A x + b| + w by alternating signs."""
    opts = opts or SolverOptions()
    if ensemble.field != REAL:
        raise ValueError("real solver requires a real ensemble")
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (ensemble.m,):
        raise ValueError("y has wrong length")
    A, b = ensemble.A, ensemble.b

    def feas(x):
        return float(np.linalg.norm(np.abs(A @ x + b) - y))

    outcomes = _solve_restarts(A, b, epsilon, opts, feas, y)
    return _select_report(outcomes, epsilon, scale=1.0 + float(np.linalg.norm(y)))


def solve_affine_pr_complex(
    ensemble: MeasurementEnsemble, y_or_ytilde, epsilon: float, opts: SolverOptions | None = None
) -> SolveReport:
    """Recover a complex signal by alternating phases.

    mode='magnitude' treats the data as y = |A x + b| + w; mode='intensity'
    treats it as ytilde = |A x + b|^2 + w, with feasibility measured in the
    intensity domain and the inner target built from sqrt(max(ytilde, 0)).
    """
    opts = opts or SolverOptions()
    if ensemble.field != COMPLEX:
        raise ValueError("complex solver requires a complex ensemble")
    data = np.asarray(y_or_ytilde, dtype=np.float64)
    if data.shape != (ensemble.m,):
        raise ValueError("observation vector has wrong length")
    A, b = ensemble.A, ensemble.b

    clipped = 0
    if opts.mode == "intensity":
        clipped = int(np.sum(data < 0))
        y_target = np.sqrt(np.maximum(data, 0.0))

        def feas(x):
            return float(np.linalg.norm(lifted_intensity(ensemble, x) - data))

    else:
        y_target = data

        def feas(x):
            return float(np.linalg.norm(np.abs(A @ x + b) - data))

    outcomes = _solve_restarts(A, b, epsilon, opts, feas, y_target)
    report = _select_report(outcomes, epsilon, scale=1.0 + float(np.linalg.norm(data)))
    report.clipped_intensities = clipped
    return report


def brute_force_bp_oracle(D, c, atol: float = 1e-9) -> tuple[float, np.ndarray]:
    """Exact minimum of ||x||_1 s.t. D x = c by support enumeration.

    Real instances with n <= 8 and m <= n only.  Every optimal basic
    solution of the underlying LP has at most m nonzeros, so enumerating
    all supports of size <= m and keeping the feasible least-squares
    candidates is exhaustive.
    """
    D = np.asarray(D, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if D.ndim != 2 or c.shape != (D.shape[0],):
        raise ValueError("dimension mismatch between D and c")
    m, n = D.shape
    if n > 8 or m > n:
        raise ValueError("oracle limited to n <= 8 and m <= n")
    feas_tol = atol * (1.0 + float(np.linalg.norm(c)))
    best_obj = math.inf
    best_x = None
    if np.linalg.norm(c) <= feas_tol:
        return 0.0, np.zeros(n)
    for size in range(1, m + 1):
        for support in combinations(range(n), size):
            sub = D[:, support]
            sol, _, _, _ = np.linalg.lstsq(sub, c, rcond=None)
            if np.linalg.norm(sub @ sol - c) > feas_tol:
                continue
            obj = float(np.sum(np.abs(sol)))
            if obj < best_obj:
                best_obj = obj
                best_x = np.zeros(n)
                best_x[list(support)] = sol
    if best_x is None:
        raise ValueError("system D x = c is infeasible")
    return best_obj, best_x
