"""Deterministic, seeded generation of ensembles, signals, and noise.

Every random object is drawn from a stream derived from a ``SeedSpec``:
a 64-bit master seed plus an ordered tuple of labels naming the consumer.
Derivation is a splitmix64 avalanche over the label material, so disjoint
labels give independent streams and any object can be regenerated from its
recorded seed metadata alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import COMPLEX, REAL, MeasurementEnsemble, ProblemInstance

_MASK64 = (1 << 64) - 1


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def _label_word(label) -> int:
    if isinstance(label, bool):
        raise TypeError("bool labels are ambiguous; use int or str")
    if isinstance(label, (int, np.integer)):
        return int(label) & _MASK64
    if isinstance(label, str):
        # FNV-1a over utf-8 bytes; stable across runs unlike hash().
        h = 0xCBF29CE484222325
        for byte in label.encode("utf-8"):
            h = ((h ^ byte) * 0x100000001B3) & _MASK64
        return h
    raise TypeError(f"unsupported stream label type {type(label).__name__}")


@dataclass(frozen=True)
class SeedSpec:
    """Master seed plus stream labels identifying one consumer."""

    master_seed: int
    labels: tuple = ()

    def __post_init__(self):
        if not 0 <= int(self.master_seed) <= _MASK64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "labels", tuple(self.labels))

    def child(self, *labels) -> "SeedSpec":
        return SeedSpec(self.master_seed, self.labels + labels)

    def derive(self) -> int:
        state = _splitmix64(int(self.master_seed))
        for label in self.labels:
            state = _splitmix64(state ^ _label_word(label))
        return state

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.derive())


def gen_real_gaussian_matrix(m: int, n: int, seed: SeedSpec) -> np.ndarray:
    """m x n matrix of i.i.d. N(0, 1/m) entries."""
    if m < 1 or n < 1:
        raise ValueError("m and n must be at least 1")
    return seed.rng().normal(0.0, 1.0 / math.sqrt(m), size=(m, n))


def gen_complex_gaussian_matrix(m: int, n: int, seed: SeedSpec) -> np.ndarray:
    """m x n matrix with independent real/imag parts N(0, 1/2), E|a_jk|^2 = 1."""
    if m < 1 or n < 1:
        raise ValueError("m and n must be at least 1")
    rng = seed.rng()
    re = rng.standard_normal((m, n))
    im = rng.standard_normal((m, n))
    return (re + 1j * im) / math.sqrt(2.0)


def gen_bias_real(m: int, c: float = 1.0) -> np.ndarray:
    """Constant bias c * 1_m / sqrt(m); its subset-norm band is (c*sqrt(ceil(m/2)/m), c)."""
    if c <= 0:
        raise ValueError("bias scale c must be positive")
    if m < 1:
        raise ValueError("m must be at least 1")
    return np.full(m, c / math.sqrt(m))


def gen_bias_complex(m: int, seed: SeedSpec) -> np.ndarray:
    """Length-m vector of i.i.d. standard complex Gaussian entries (E|b_j|^2 = 1)."""
    if m < 1:
        raise ValueError("m must be at least 1")
    rng = seed.rng()
    return (rng.standard_normal(m) + 1j * rng.standard_normal(m)) / math.sqrt(2.0)


def gen_sparse_signal(n: int, k: int, field: str, amplitude_model: str, seed: SeedSpec) -> np.ndarray:
    """Exactly k-sparse signal with support uniform over k-subsets.

    amplitude_model: 'unit' (signs / unit-modulus phases), 'gaussian'
    (standard normal scalars), or 'flat' (all ones).
    """
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    rng = seed.rng()
    support = rng.choice(n, size=k, replace=False)
    if field == REAL:
        if amplitude_model == "unit":
            vals = rng.choice([-1.0, 1.0], size=k)
        elif amplitude_model == "gaussian":
            vals = rng.standard_normal(k)
            vals[vals == 0.0] = 1.0
        elif amplitude_model == "flat":
            vals = np.ones(k)
        else:
            raise ValueError(f"unknown amplitude model {amplitude_model!r}")
        x = np.zeros(n)
    elif field == COMPLEX:
        if amplitude_model == "unit":
            vals = np.exp(2j * np.pi * rng.random(k))
        elif amplitude_model == "gaussian":
            vals = (rng.standard_normal(k) + 1j * rng.standard_normal(k)) / math.sqrt(2.0)
            vals[vals == 0.0] = 1.0
        elif amplitude_model == "flat":
            vals = np.ones(k, dtype=np.complex128)
        else:
            raise ValueError(f"unknown amplitude model {amplitude_model!r}")
        x = np.zeros(n, dtype=np.complex128)
    else:
        raise ValueError(f"unknown field {field!r}")
    x[support] = vals
    return x


def gen_noise(m: int, epsilon_budget: float, model: str, seed: SeedSpec) -> np.ndarray:
    """Real noise vector with ||w||_2 <= epsilon_budget.

    'sphere' is uniform on the radius-epsilon sphere; 'gaussian_clipped' is
    standard Gaussian rescaled only when its norm exceeds the budget.
    """
    if epsilon_budget < 0:
        raise ValueError("epsilon_budget must be nonnegative")
    if m < 1:
        raise ValueError("m must be at least 1")
    if epsilon_budget == 0.0:
        return np.zeros(m)
    rng = seed.rng()
    g = rng.standard_normal(m)
    nrm = np.linalg.norm(g)
    if nrm == 0.0:
        g = np.zeros(m)
        g[0] = 1.0
        nrm = 1.0
    if model == "sphere":
        return g * (epsilon_budget / nrm)
    if model == "gaussian_clipped":
        if nrm > epsilon_budget:
            return g * (epsilon_budget / nrm)
        return g
    raise ValueError(f"unknown noise model {model!r}")


def _normalize_bias(field: str, bias) -> dict:
    """Canonical bias spec; None picks the field default (constant c=1 for
    real, standard complex Gaussian for complex)."""
    if bias is None:
        return {"kind": "constant", "c": 1.0} if field == REAL else {"kind": "complex_gaussian"}
    if isinstance(bias, (int, float)):
        return {"kind": "constant", "c": float(bias)}
    if not isinstance(bias, dict) or "kind" not in bias:
        raise ValueError(f"unsupported bias spec {bias!r}")
    kind = bias["kind"]
    if kind == "constant":
        return {"kind": "constant", "c": float(bias["c"])}
    if kind == "vector":
        return {"kind": "vector", "values": bias["values"]}
    if kind == "complex_gaussian":
        if field == REAL:
            raise ValueError("complex_gaussian bias requires a complex ensemble")
        return {"kind": "complex_gaussian"}
    raise ValueError(f"unsupported bias kind {kind!r}")


def _make_bias(field: str, m: int, bias: dict, seed: SeedSpec):
    kind = bias["kind"]
    if kind == "vector":
        vals = bias["values"]
        if isinstance(vals, dict):
            b = np.asarray(vals["re"], dtype=np.float64) + 1j * np.asarray(vals["im"], dtype=np.float64)
        else:
            b = np.asarray(vals, dtype=np.float64)
        if b.shape != (m,):
            raise ValueError("user-supplied bias has wrong length")
        return b
    if kind == "constant":
        if field == REAL:
            return gen_bias_real(m, bias["c"])
        return np.full(m, complex(bias["c"]) / math.sqrt(m))
    return gen_bias_complex(m, seed.child("bias"))


def make_ensemble(field: str, m: int, n: int, seed: SeedSpec, bias=None) -> MeasurementEnsemble:
    """Fresh measurement ensemble with self-describing seed metadata."""
    if field == REAL:
        A = gen_real_gaussian_matrix(m, n, seed.child("A"))
    elif field == COMPLEX:
        A = gen_complex_gaussian_matrix(m, n, seed.child("A"))
    else:
        raise ValueError(f"unknown field {field!r}")
    bias = _normalize_bias(field, bias)
    b = _make_bias(field, m, bias, seed)
    meta = {
        "generator": "affinepr.ensemble.v1",
        "field": field,
        "m": m,
        "n": n,
        "master_seed": int(seed.master_seed),
        "labels": list(seed.labels),
        "bias": bias,
    }
    return MeasurementEnsemble(field=field, A=A, b=b, seed_meta=meta)


def make_instance(
    field: str,
    n: int,
    k: int,
    m: int,
    seed: SeedSpec,
    amplitude_model: str = "gaussian",
    bias=None,
    epsilon: float = 0.0,
    noise_model: str = "sphere",
    with_intensity: bool = False,
) -> ProblemInstance:
    """Generate a full problem instance; regenerable from its seed_meta."""
    ens = make_ensemble(field, m, n, seed, bias=bias)
    x0 = gen_sparse_signal(n, k, field, amplitude_model, seed.child("x0"))
    w = gen_noise(m, epsilon, noise_model, seed.child("w"))
    y = np.abs(ens.A @ x0 + ens.b) + w
    ytilde = None
    if with_intensity:
        ytilde = np.abs(ens.A @ x0 + ens.b) ** 2 + w
    meta = dict(ens.seed_meta)
    meta.update(
        {
            "generator": "affinepr.instance.v1",
            "k": k,
            "amplitude_model": amplitude_model,
            "epsilon": float(epsilon),
            "noise_model": noise_model,
            "with_intensity": bool(with_intensity),
        }
    )
    ens = MeasurementEnsemble(field=ens.field, A=ens.A, b=ens.b, seed_meta=meta)
    return ProblemInstance(ensemble=ens, x0=x0, w=w, y=y, k=k, ytilde=ytilde)


def regenerate_instance(seed_meta: dict) -> ProblemInstance:
    """Rebuild a ProblemInstance from instance seed metadata alone."""
    if seed_meta.get("generator") != "affinepr.instance.v1":
        raise ValueError("seed_meta does not describe a generated instance")
    seed = SeedSpec(seed_meta["master_seed"], tuple(seed_meta["labels"]))
    return make_instance(
        field=seed_meta["field"],
        n=seed_meta["n"],
        k=seed_meta["k"],
        m=seed_meta["m"],
        seed=seed,
        amplitude_model=seed_meta["amplitude_model"],
        bias=seed_meta["bias"],
        epsilon=seed_meta["epsilon"],
        noise_model=seed_meta["noise_model"],
        with_intensity=seed_meta["with_intensity"],
    )
