"""Experiment orchestration, persistence, and CSV/JSON emission.

All experiments are driven by an ``ExperimentConfig`` (JSON-mirrored,
unknown keys rejected) and a master seed.  Per-trial randomness comes from
streams derived as (master_seed, experiment, cell, trial), so results are
byte-reproducible regardless of execution order or thread count, and
interrupted grid runs resume from a sidecar file of completed cells.

Wall-clock timings are kept on the in-memory results only; serialized
output holds a zero in the wall_ms column so that reruns of the same
config are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field as dc_field, fields

import numpy as np

from .model import (
    COMPLEX,
    REAL,
    MeasurementEnsemble,
    ProblemInstance,
    error_metrics,
)
from .rng import SeedSpec, make_instance
from .ripcheck import rip_ratio_sample, srip_profile
from .solver import SolverOptions, solve_affine_pr_complex, solve_affine_pr_real

EXPERIMENTS = (
    "phase_grid",
    "noise_curve",
    "impossibility",
    "srip",
    "ripmap",
    "lemma_suite",
)

PHASE_GRID_HEADER = "m,k,trials,successes,wilson_lo,wilson_hi,median_err,median_phase_err,wall_ms"
NOISE_CURVE_HEADER = "epsilon,trials,successes,wilson_lo,wilson_hi,median_err,median_phase_err,wall_ms"

_WILSON_Z = 1.959963984540054  # two-sided 95%


class InstanceFormatError(ValueError):
    """Raised when a stored instance fails version or checksum validation."""


@dataclass
class ExperimentConfig:
    experiment: str
    field: str = REAL
    n: int = 64
    k_list: list = dc_field(default_factory=lambda: [3])
    m_list: list = dc_field(default_factory=lambda: [60])
    trials_per_cell: int = 20
    epsilon_list: list = dc_field(default_factory=lambda: [0.0])
    bias: dict = dc_field(default_factory=lambda: {"kind": "constant", "c": 1.0})
    master_seed: int = 0
    solver: SolverOptions = dc_field(default_factory=SolverOptions)
    output_path: str = ""

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.field not in (REAL, COMPLEX):
            raise ValueError(f"unknown field {self.field!r}")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not self.k_list or not self.m_list or not self.epsilon_list:
            raise ValueError("grid lists must be nonempty")
        if any(k > self.n or k < 1 for k in self.k_list):
            raise ValueError("every k must satisfy 1 <= k <= n")
        if any(m < 1 for m in self.m_list):
            raise ValueError("every m must be >= 1")
        if self.trials_per_cell < 1:
            raise ValueError("trials_per_cell must be >= 1")
        if any(e < 0 for e in self.epsilon_list):
            raise ValueError("epsilons must be nonnegative")
        if sorted(self.epsilon_list) != list(self.epsilon_list):
            raise ValueError("epsilon_list must be sorted ascending")
        kind = self.bias.get("kind")
        if kind not in ("constant", "complex_gaussian", "file"):
            raise ValueError(f"unknown bias kind {kind!r}")
        return self

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        allowed = {f.name for f in fields(cls)}
        unknown = set(data) - allowed
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        if "solver" in data and isinstance(data["solver"], dict):
            sopts = data["solver"]
            sallowed = {f.name for f in fields(SolverOptions)}
            sunknown = set(sopts) - sallowed
            if sunknown:
                raise ValueError(f"unknown solver option keys: {sorted(sunknown)}")
            data["solver"] = SolverOptions(**sopts)
        return cls(**data).validate()

    @classmethod
    def from_json(cls, path: str) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        out = asdict(self)
        return out

    def digest(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        ).hexdigest()


@dataclass
class CellResult:
    m: int
    k: int
    epsilon: float
    success_count: int
    trial_count: int
    median_plain_error: float
    median_global_phase_error: float
    median_objective_gap: float
    wall_time_ms: int


@dataclass
class TrialResult:
    plain: float
    relative_plain: float
    global_phase: float
    objective_gap: float
    success: bool


def wilson_interval(successes: int, trials: int, z: float = _WILSON_Z) -> tuple[float, float]:
    if trials <= 0:
        raise ValueError("trials must be positive")
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = (z / denom) * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials))
    return max(center - half, 0.0), min(center + half, 1.0)


def _fmt(v: float) -> str:
    return format(float(v), ".12g")


def _bias_for(config: ExperimentConfig):
    kind = config.bias["kind"]
    if kind == "constant":
        return {"kind": "constant", "c": float(config.bias["c"])}
    if kind == "complex_gaussian":
        return {"kind": "complex_gaussian"}
    if kind == "file":
        with open(config.bias["path"], "r", encoding="utf-8") as fh:
            return {"kind": "vector", "values": json.load(fh)}
    raise ValueError(f"unsupported bias kind {kind!r}")


def _run_trial(config: ExperimentConfig, m: int, k: int, epsilon: float, trial: int) -> TrialResult:
    seed = SeedSpec(config.master_seed, (config.experiment, m, k, repr(float(epsilon)), trial))
    inst = make_instance(
        config.field,
        config.n,
        k,
        m,
        seed,
        amplitude_model="gaussian",
        bias=_bias_for(config),
        epsilon=epsilon,
        noise_model="sphere",
    )
    opts = config.solver
    if config.field == REAL:
        report = solve_affine_pr_real(inst.ensemble, inst.y, epsilon, opts)
    else:
        report = solve_affine_pr_complex(inst.ensemble, inst.y, epsilon, opts)
    met = error_metrics(report.xhat, inst.x0)
    gap = report.objective - float(np.sum(np.abs(inst.x0)))
    if config.field == REAL:
        success = met.relative_plain <= opts.success_tol
    else:
        success = met.global_phase <= opts.success_tol * (float(np.linalg.norm(inst.x0)) + 1.0)
    return TrialResult(met.plain_l2, met.relative_plain, met.global_phase, gap, success)


def run_cell(config: ExperimentConfig, m: int, k: int, epsilon: float) -> tuple[CellResult, list]:
    start = time.monotonic()
    trials = [_run_trial(config, m, k, epsilon, t) for t in range(config.trials_per_cell)]
    wall = int((time.monotonic() - start) * 1000)
    cell = CellResult(
        m=m,
        k=k,
        epsilon=epsilon,
        success_count=sum(t.success for t in trials),
        trial_count=len(trials),
        median_plain_error=statistics.median(t.plain for t in trials),
        median_global_phase_error=statistics.median(t.global_phase for t in trials),
        median_objective_gap=statistics.median(t.objective_gap for t in trials),
        wall_time_ms=wall,
    )
    return cell, trials


def _grid_row(cell: CellResult, lead: str) -> str:
    lo, hi = wilson_interval(cell.success_count, cell.trial_count)
    return ",".join(
        [
            lead,
            str(cell.trial_count),
            str(cell.success_count),
            _fmt(lo),
            _fmt(hi),
            _fmt(cell.median_plain_error),
            _fmt(cell.median_global_phase_error),
            "0",
        ]
    )


def _cell_to_json(cell: CellResult) -> dict:
    lo, hi = wilson_interval(cell.success_count, cell.trial_count)
    return {
        "m": cell.m,
        "k": cell.k,
        "epsilon": cell.epsilon,
        "trials": cell.trial_count,
        "successes": cell.success_count,
        "wilson_lo": lo,
        "wilson_hi": hi,
        "median_err": cell.median_plain_error,
        "median_phase_err": cell.median_global_phase_error,
        "median_objective_gap": cell.median_objective_gap,
    }


def _resume_path(out_path: str) -> str:
    return out_path + ".partial.jsonl"


def _load_resume(out_path: str, digest: str) -> dict:
    path = _resume_path(out_path)
    done = {}
    if not out_path or not os.path.exists(path):
        return done
    try:
        with open(path, "r", encoding="utf-8") as fh:
            header = json.loads(fh.readline())
            if header.get("config_digest") != digest:
                return {}
            for line in fh:
                rec = json.loads(line)
                done[tuple(rec["key"])] = CellResult(**rec["cell"])
    except (ValueError, KeyError, TypeError):
        return {}
    return done


class _ResumeWriter:
    def __init__(self, out_path: str, digest: str, preexisting: dict):
        self.path = _resume_path(out_path) if out_path else ""
        self.fh = None
        if self.path:
            mode = "a" if preexisting else "w"
            self.fh = open(self.path, mode, encoding="utf-8")
            if mode == "w":
                self.fh.write(json.dumps({"config_digest": digest}) + "\n")
                self.fh.flush()

    def record(self, key, cell: CellResult):
        if self.fh:
            self.fh.write(json.dumps({"key": list(key), "cell": asdict(cell)}) + "\n")
            self.fh.flush()

    def close(self, success: bool):
        if self.fh:
            self.fh.close()
            if success and os.path.exists(self.path):
                os.remove(self.path)


def _run_cells(config: ExperimentConfig, keys: list, threads: int = 1, fail_after: int | None = None):
    """Run (m, k, eps) cells, resumably; returns cells in key order."""
    digest = config.digest()
    done = _load_resume(config.output_path, digest) if config.output_path else {}
    writer = _ResumeWriter(config.output_path, digest, done)
    pending = [key for key in keys if key not in done]
    if fail_after is not None:
        pending = pending[:fail_after]
    try:
        if threads > 1 and len(pending) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(
                    pool.map(lambda key: run_cell(config, *key)[0], pending)
                )
        else:
            results = [run_cell(config, *key)[0] for key in pending]
        for key, cell in zip(pending, results):
            done[key] = cell
            writer.record(key, cell)
        if fail_after is not None:
            writer.close(success=False)
            raise InterruptedError("stopped early for resumability testing")
    except BaseException:
        writer.close(success=False)
        raise
    writer.close(success=len(done) == len(keys))
    return [done[key] for key in keys]


def run_phase_grid(
    config: ExperimentConfig, threads: int = 1, fail_after: int | None = None
) -> list[CellResult]:
    """Noiseless success-probability grid over (m, k) cells."""
    config.validate()
    keys = [(m, k, 0.0) for m in config.m_list for k in config.k_list]
    cells = _run_cells(config, keys, threads=threads, fail_after=fail_after)
    if config.output_path:
        write_phase_grid_csv(config.output_path, cells)
    return cells


def write_phase_grid_csv(path: str, cells: list[CellResult]) -> None:
    lines = [PHASE_GRID_HEADER]
    for cell in cells:
        lines.append(_grid_row(cell, f"{cell.m},{cell.k}"))
    _write_text(path, "\n".join(lines) + "\n")


@dataclass
class NoiseCurveResult:
    cells: list
    slope: float
    r_squared: float


def run_noise_curve(config: ExperimentConfig, threads: int = 1) -> NoiseCurveResult:
    """Median error vs epsilon at fixed (n, k, m), with a through-origin fit."""
    config.validate()
    m = config.m_list[0]
    k = config.k_list[0]
    keys = [(m, k, float(e)) for e in config.epsilon_list]
    cells = _run_cells(config, keys, threads=threads)
    eps = np.array([c.epsilon for c in cells])
    err = np.array(
        [
            c.median_plain_error if config.field == REAL else c.median_global_phase_error
            for c in cells
        ]
    )
    denom = float(np.sum(eps**2))
    slope = float(np.sum(eps * err) / denom) if denom > 0 else 0.0
    ss_res = float(np.sum((err - slope * eps) ** 2))
    ss_tot = float(np.sum((err - float(np.mean(err))) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    if config.output_path:
        lines = [NOISE_CURVE_HEADER]
        for cell in cells:
            lines.append(_grid_row(cell, _fmt(cell.epsilon)))
        _write_text(config.output_path, "\n".join(lines) + "\n")
    return NoiseCurveResult(cells=cells, slope=slope, r_squared=r2)


@dataclass
class ImpossibilityReport:
    r_values: list
    collision_residuals: list
    alias_errors: list
    sparse_errors: list
    z0_norm: float


def run_impossibility_demo(config: ExperimentConfig) -> ImpossibilityReport:
    """Demonstrate that no decoder recovers sparse signals when b = A z0.

    Uses m <= n so the bias lies in the range of A.  For each scale r the
    observation |A (r x0) + b| admits the non-sparse alias -r x0 - 2 z0
    producing identical measurements; the l1 decoder tracks the sparse
    signal, so its distance to the alias grows linearly in r.
    """
    config.validate()
    m = config.m_list[0]
    k = config.k_list[0]
    if m > config.n:
        raise ValueError("impossibility demo requires m <= n")
    if config.field != REAL:
        raise ValueError("impossibility demo is a real-field construction")
    seed = SeedSpec(config.master_seed, ("impossibility", m, k))
    inst = make_instance(
        REAL, config.n, k, m, seed, amplitude_model="gaussian", bias=_bias_for(config)
    )
    A, b, x0 = inst.ensemble.A, inst.ensemble.b, inst.x0
    rank = int(np.linalg.matrix_rank(A))
    if rank < m:
        raise ValueError("A is not full row rank")
    z0, _, _, _ = np.linalg.lstsq(A, b, rcond=None)

    r_values = [1.0, 10.0, 100.0, 1000.0]
    collision = []
    alias_err = []
    sparse_err = []
    for r in r_values:
        lhs = np.abs(A @ (r * x0 + 2.0 * z0) - b)
        rhs = np.abs(A @ (r * x0) + b)
        collision.append(float(np.max(np.abs(lhs - rhs))))
        y_r = rhs
        report = solve_affine_pr_real(inst.ensemble, y_r, 0.0, config.solver)
        alias = -r * x0 - 2.0 * z0
        alias_err.append(float(np.linalg.norm(report.xhat - alias)))
        sparse_err.append(float(np.linalg.norm(report.xhat - r * x0)))
    out = ImpossibilityReport(
        r_values=r_values,
        collision_residuals=collision,
        alias_errors=alias_err,
        sparse_errors=sparse_err,
        z0_norm=float(np.linalg.norm(z0)),
    )
    if config.output_path:
        lines = ["r,collision_residual,alias_error,sparse_error"]
        for i, r in enumerate(r_values):
            lines.append(
                ",".join([_fmt(r), _fmt(collision[i]), _fmt(alias_err[i]), _fmt(sparse_err[i])])
            )
        _write_text(config.output_path, "\n".join(lines) + "\n")
    return out


def run_srip(config: ExperimentConfig):
    """SRIP profiles for A and the augmented [A b]."""
    config.validate()
    m = config.m_list[0]
    k = config.k_list[0]
    seed = SeedSpec(config.master_seed, ("srip", m, k))
    inst = make_instance(
        config.field, config.n, k, m, seed, amplitude_model="gaussian", bias=_bias_for(config)
    )
    A, b = inst.ensemble.A, inst.ensemble.b
    est_a = srip_profile(A, k, config.trials_per_cell, seed.child("profileA"))
    aug = np.column_stack([A, b])
    est_ab = srip_profile(
        aug, k, config.trials_per_cell, seed.child("profileAb"), last_coord_free=True
    )
    if config.output_path:
        lines = ["target,k,trials,lower_hat,upper_hat"]
        for name, est in (("A", est_a), ("Ab", est_ab)):
            lines.append(
                ",".join([name, str(k), str(est.samples), _fmt(est.lower_hat), _fmt(est.upper_hat)])
            )
        _write_text(config.output_path, "\n".join(lines) + "\n")
    return est_a, est_ab


def run_ripmap(config: ExperimentConfig):
    """Ratio band of the lifted map over the structured rank-2 class."""
    config.validate()
    m = config.m_list[0]
    k = config.k_list[0]
    seed = SeedSpec(config.master_seed, ("ripmap", m, k))
    inst = make_instance(
        config.field, config.n, k, m, seed, amplitude_model="gaussian", bias=_bias_for(config)
    )
    est = rip_ratio_sample(inst.ensemble.A, inst.ensemble.b, k, config.trials_per_cell, seed)
    if config.output_path:
        lines = [
            "k,samples,ratio_min,ratio_max,spread",
            ",".join(
                [
                    str(k),
                    str(est.samples),
                    _fmt(est.lower_hat),
                    _fmt(est.upper_hat),
                    _fmt(est.upper_hat / est.lower_hat if est.lower_hat > 0 else math.inf),
                ]
            ),
        ]
        _write_text(config.output_path, "\n".join(lines) + "\n")
    return est


def run_lemma_suite(config: ExperimentConfig) -> dict:
    """Randomized sweeps of the three supporting-lemma checkers."""
    from .lemmas import (
        batch_lifted_distance_check,
        moment_bound_check,
        sparse_convex_decompose,
    )

    config.validate()
    n = min(config.n, 16)
    count = config.trials_per_cell
    master = SeedSpec(config.master_seed, ("lemma_suite",))

    rng = master.child("decompose").rng()
    decompose_failures = 0
    for _ in range(count):
        dim = int(rng.integers(1, 33))
        k = int(rng.integers(1, dim + 1))
        theta = float(rng.uniform(0.1, 2.0))
        v = rng.standard_normal(dim)
        v = np.clip(v, -theta, theta)
        l1 = float(np.sum(np.abs(v)))
        if l1 > k * theta:
            v *= (k * theta / l1) * (1.0 - 1e-9)
        try:
            sparse_convex_decompose(v, k, theta)
        except (AssertionError, RuntimeError):
            decompose_failures += 1

    rng = master.child("lifted").rng()
    u = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    v = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    inner = np.sum(np.conj(u) * v, axis=1)
    phases = np.where(np.abs(inner) > 0, np.exp(-1j * np.angle(inner)), 1.0)
    v = v * phases[:, None]
    _, _, holds = batch_lifted_distance_check(u, v)
    lifted_violations = int(np.sum(~holds))

    rng = master.child("moment").rng()
    moment_failures = 0
    moment_cases = max(1, count // 200)
    for i in range(moment_cases):
        dim = int(rng.integers(2, 13))
        q, _ = np.linalg.qr(rng.standard_normal((dim, 2)) + 1j * rng.standard_normal((dim, 2)))
        lam = rng.standard_normal(2)
        H = lam[0] * np.outer(q[:, 0], q[:, 0].conj()) + lam[1] * np.outer(q[:, 1], q[:, 1].conj())
        h = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        bb = complex(rng.standard_normal() + 1j * rng.standard_normal())
        _, _, _, ok = moment_bound_check(H, h, bb, 100_000, master.child("momentmc", i))
        if not ok:
            moment_failures += 1

    summary = {
        "decompose_checked": count,
        "decompose_failures": decompose_failures,
        "lifted_checked": count,
        "lifted_violations": lifted_violations,
        "moment_checked": moment_cases,
        "moment_failures": moment_failures,
    }
    if config.output_path:
        _write_text(config.output_path, json.dumps(summary, sort_keys=True, indent=2) + "\n")
    return summary


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _array_payload(arr: np.ndarray):
    arr = np.asarray(arr)
    if np.iscomplexobj(arr):
        return {"re": arr.real.tolist(), "im": arr.imag.tolist()}
    return arr.tolist()


def _array_restore(payload, field: str):
    if isinstance(payload, dict):
        return np.asarray(payload["re"]) + 1j * np.asarray(payload["im"])
    arr = np.asarray(payload, dtype=np.float64)
    if field == COMPLEX:
        arr = arr.astype(np.complex128)
    return arr


FORMAT_NAME = "affinepr-instance"
FORMAT_VERSION = 1


def save_instance(path: str, inst: ProblemInstance) -> None:
    """Write a checksummed, versioned, lossless JSON snapshot of an instance."""
    payload = {
        "field": inst.ensemble.field,
        "A": _array_payload(inst.ensemble.A),
        "b": _array_payload(inst.ensemble.b),
        "seed_meta": inst.ensemble.seed_meta,
        "x0": _array_payload(inst.x0),
        "w": _array_payload(inst.w),
        "y": _array_payload(inst.y),
        "ytilde": None if inst.ytilde is None else _array_payload(inst.ytilde),
        "k": inst.k,
    }
    body = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "sha256": hashlib.sha256(body.encode("utf-8")).hexdigest(),
        "payload": payload,
    }
    _write_text(path, json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")


def load_instance(path: str) -> ProblemInstance:
    """Load and verify an instance written by ``save_instance``."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except ValueError as exc:
        raise InstanceFormatError(f"corrupt instance file: {exc}") from exc
    if doc.get("format") != FORMAT_NAME:
        raise InstanceFormatError("not an instance file")
    if doc.get("version") != FORMAT_VERSION:
        raise InstanceFormatError(f"unsupported version {doc.get('version')!r}")
    payload = doc.get("payload")
    body = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    if hashlib.sha256(body.encode("utf-8")).hexdigest() != doc.get("sha256"):
        raise InstanceFormatError("checksum mismatch")
    field = payload["field"]
    ens = MeasurementEnsemble(
        field=field,
        A=_array_restore(payload["A"], field),
        b=_array_restore(payload["b"], field),
        seed_meta=payload["seed_meta"],
    )
    return ProblemInstance(
        ensemble=ens,
        x0=_array_restore(payload["x0"], field),
        w=_array_restore(payload["w"], REAL),
        y=_array_restore(payload["y"], REAL),
        k=payload["k"],
        ytilde=None if payload["ytilde"] is None else _array_restore(payload["ytilde"], REAL),
    )
