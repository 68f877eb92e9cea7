"""Domain types, the forward magnitude measurement operator, and error metrics.

The measurement model observed throughout the package is

    y_j = |<a_j, x> + b_j| + w_j,

where ``<a_j, x>`` is conjugate-linear in ``a_j``.  An ensemble stores the
matrix ``A`` whose j-th row applied to ``x`` yields that inner product, so
``y = |A @ x + b| + w`` elementwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

REAL = "real"
COMPLEX = "complex"

_DTYPES = {REAL: np.float64, COMPLEX: np.complex128}


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.setflags(write=False)
    return out


def as_signal(entries, field: str) -> np.ndarray:
    """Coerce ``entries`` to a 1-d signal array of the requested field.

    Real-field signals are float64 and must carry no imaginary part;
    complex-field signals are complex128.
    """
    if field not in _DTYPES:
        raise ValueError(f"unknown field {field!r}")
    arr = np.asarray(entries)
    if field == REAL:
        if np.iscomplexobj(arr):
            if np.any(arr.imag != 0):
                raise ValueError("real-field signal has nonzero imaginary part")
            arr = arr.real
        arr = np.asarray(arr, dtype=np.float64)
    else:
        arr = np.asarray(arr, dtype=np.complex128)
    if arr.ndim != 1:
        raise ValueError(f"signal must be 1-d, got shape {arr.shape}")
    return arr


def field_of(arr: np.ndarray) -> str:
    return COMPLEX if np.iscomplexobj(arr) else REAL


@dataclass(frozen=True)
class MeasurementEnsemble:
    """Measurement matrix A (m x n), bias vector b (m), and provenance.

    ``seed_meta`` records the generator name and seed material needed to
    rebuild the ensemble (and, for full instances, the signal and noise).
    """

    field: str
    A: np.ndarray
    b: np.ndarray
    seed_meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if self.field not in _DTYPES:
            raise ValueError(f"unknown field {self.field!r}")
        dt = _DTYPES[self.field]
        A = np.asarray(self.A, dtype=dt)
        b = np.asarray(self.b, dtype=dt)
        if A.ndim != 2:
            raise ValueError("A must be a 2-d matrix")
        if b.ndim != 1 or b.shape[0] != A.shape[0]:
            raise ValueError("b must be a length-m vector matching A")
        if A.shape[0] < 1 or A.shape[1] < 1:
            raise ValueError("m and n must be at least 1")
        object.__setattr__(self, "A", _freeze(A))
        object.__setattr__(self, "b", _freeze(b))

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]


@dataclass(frozen=True)
class ProblemInstance:
    """A generated recovery problem: ensemble, truth, noise, observations."""

    ensemble: MeasurementEnsemble
    x0: np.ndarray
    w: np.ndarray
    y: np.ndarray
    k: int
    ytilde: np.ndarray | None = None

    def __post_init__(self):
        x0 = as_signal(self.x0, self.ensemble.field)
        if x0.shape[0] != self.ensemble.n:
            raise ValueError("x0 length does not match ensemble")
        w = np.asarray(self.w, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if w.shape != (self.ensemble.m,) or y.shape != (self.ensemble.m,):
            raise ValueError("w and y must be real length-m vectors")
        object.__setattr__(self, "x0", _freeze(x0))
        object.__setattr__(self, "w", _freeze(w))
        object.__setattr__(self, "y", _freeze(y))
        if self.ytilde is not None:
            yt = np.asarray(self.ytilde, dtype=np.float64)
            if yt.shape != (self.ensemble.m,):
                raise ValueError("ytilde must be a real length-m vector")
            object.__setattr__(self, "ytilde", _freeze(yt))


@dataclass(frozen=True)
class ErrorMetrics:
    plain_l2: float
    sign_folded: float
    global_phase: float
    relative_plain: float


def _check_compatible(ensemble: MeasurementEnsemble, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if np.iscomplexobj(x) and ensemble.field == REAL:
        raise ValueError("complex signal passed to a real ensemble")
    x = np.asarray(x, dtype=_DTYPES[ensemble.field])
    if x.shape != (ensemble.n,):
        raise ValueError(f"signal shape {x.shape} does not match n={ensemble.n}")
    return x


def forward_model(ensemble: MeasurementEnsemble, x, w=None) -> np.ndarray:
    """Magnitude measurements y_j = |<a_j, x> + b_j| + w_j."""
    x = _check_compatible(ensemble, x)
    mags = np.abs(ensemble.A @ x + ensemble.b)
    if w is None:
        return mags
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (ensemble.m,):
        raise ValueError("noise vector has wrong length")
    return mags + w


def lifted_intensity(ensemble: MeasurementEnsemble, x) -> np.ndarray:
    """Intensity measurements |<a_j, x> + b_j|^2 (the rank-one lifted map)."""
    x = _check_compatible(ensemble, x)
    v = ensemble.A @ x + ensemble.b
    return np.abs(v) ** 2


def bias_band(b, fraction: float = 0.5) -> tuple[float, float]:
    """Exact (min, max) of ||b_I||_2 over index sets with |I| >= fraction*m.

    Terms |b_j|^2 are nonnegative, so the max takes every index and the min
    keeps only the ceil(fraction*m) smallest.
    """
    b = np.asarray(b)
    if b.ndim != 1 or b.size == 0:
        raise ValueError("b must be a nonempty vector")
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    sq = np.sort(np.abs(b) ** 2)
    keep = math.ceil(fraction * b.size)
    alpha_hat = math.sqrt(float(np.sum(sq[:keep])))
    beta_hat = math.sqrt(float(np.sum(sq)))
    return alpha_hat, beta_hat


def best_k_term_error(x, k: int, p: int = 1) -> float:
    """l_p norm of x with its k largest-magnitude entries zeroed.

    Magnitude ties are broken by retaining the lowest index.
    """
    x = np.asarray(x)
    if x.ndim != 1:
        raise ValueError("x must be 1-d")
    if not 0 <= k <= x.size:
        raise ValueError(f"k={k} out of range for n={x.size}")
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    order = np.argsort(-np.abs(x), kind="stable")
    tail = np.abs(x[order[k:]])
    if p == 1:
        return float(np.sum(tail))
    return float(np.sqrt(np.sum(tail**2)))


def _phase_objective(theta, nx2, n02, s):
    # f(theta) = ||xhat - e^{i theta} x0|| + |1 - e^{i theta}|
    cross = np.real(np.exp(-1j * theta) * s)
    d2 = np.maximum(nx2 + n02 - 2.0 * cross, 0.0)
    return np.sqrt(d2) + 2.0 * np.abs(np.sin(theta / 2.0))


def _golden_min(f, lo, hi, tol=1e-10):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (a + b) / 2.0


def global_phase_error(xhat, x0, grid: int = 2048) -> float:
    """min over theta of ||xhat - e^{i theta} x0||_2 + |1 - e^{i theta}|.

    Coarse grid over [0, 2pi) followed by golden-section refinement around
    the best grid point.  Real inputs restrict theta to {0, pi}.
    """
    xhat = np.asarray(xhat)
    x0 = np.asarray(x0)
    if not (np.iscomplexobj(xhat) or np.iscomplexobj(x0)):
        f0 = float(np.linalg.norm(xhat - x0))
        fpi = float(np.linalg.norm(xhat + x0)) + 2.0
        return min(f0, fpi)
    xhat = xhat.astype(np.complex128, copy=False)
    x0 = x0.astype(np.complex128, copy=False)
    nx2 = float(np.real(np.vdot(xhat, xhat)))
    n02 = float(np.real(np.vdot(x0, x0)))
    s = complex(np.vdot(x0, xhat))
    thetas = np.linspace(0.0, 2.0 * np.pi, grid, endpoint=False)
    vals = _phase_objective(thetas, nx2, n02, s)
    i = int(np.argmin(vals))
    step = 2.0 * np.pi / grid
    f = lambda t: float(_phase_objective(np.asarray(t), nx2, n02, s))
    t = _golden_min(f, thetas[i] - step, thetas[i] + step)
    return min(float(vals[i]), f(t))


def error_metrics(xhat, x0) -> ErrorMetrics:
    """All error notions used by the experiments, recomputed from scratch."""
    xhat = np.asarray(xhat)
    x0 = np.asarray(x0)
    if xhat.shape != x0.shape:
        raise ValueError("xhat and x0 must have equal length")
    if np.iscomplexobj(xhat) != np.iscomplexobj(x0):
        raise ValueError("xhat and x0 must live in the same field")
    plain = float(np.linalg.norm(xhat - x0))
    folded = min(plain, float(np.linalg.norm(xhat + x0)))
    gphase = global_phase_error(xhat, x0)
    n0 = float(np.linalg.norm(x0))
    rel = plain / n0 if n0 > 0 else plain
    return ErrorMetrics(
        plain_l2=plain,
        sign_folded=folded,
        global_phase=gphase,
        relative_plain=rel,
    )
