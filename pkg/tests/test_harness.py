import json
import os

import numpy as np
import pytest

from affinepr import (
    ExperimentConfig,
    SeedSpec,
    load_instance,
    make_instance,
    regenerate_instance,
    run_impossibility_demo,
    run_lemma_suite,
    run_noise_curve,
    run_phase_grid,
    run_ripmap,
    run_srip,
    save_instance,
    wilson_interval,
)
from affinepr.harness import InstanceFormatError, run_cell, write_phase_grid_csv

SMALL_GRID = {
    "experiment": "phase_grid",
    "field": "real",
    "n": 16,
    "k_list": [2],
    "m_list": [24, 32],
    "trials_per_cell": 4,
    "bias": {"kind": "constant", "c": 1.0},
    "master_seed": 99,
    "solver": {"restarts": 1, "restart_seed": 2},
}


def test_config_rejects_unknown_keys():
    with pytest.raises(ValueError, match="unknown config keys"):
        ExperimentConfig.from_dict({"experiment": "phase_grid", "bogus": 1})
    with pytest.raises(ValueError, match="unknown solver option"):
        ExperimentConfig.from_dict({"experiment": "phase_grid", "solver": {"nope": 2}})


def test_config_validation_errors():
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"experiment": "warp_drive"})
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"experiment": "phase_grid", "n": 4, "k_list": [9]})
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"experiment": "phase_grid", "epsilon_list": [0.2, 0.1]})
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"experiment": "phase_grid", "trials_per_cell": 0})
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"experiment": "phase_grid", "bias": {"kind": "prime"}})


def test_wilson_interval_reference():
    # independent reference implementation of the Wilson score interval
    def reference(s, n, z=1.959963984540054):
        p = s / n
        lo = (p + z * z / (2 * n) - z * ((p * (1 - p) + z * z / (4 * n)) / n) ** 0.5) / (
            1 + z * z / n
        )
        hi = (p + z * z / (2 * n) + z * ((p * (1 - p) + z * z / (4 * n)) / n) ** 0.5) / (
            1 + z * z / n
        )
        return max(lo, 0.0), min(hi, 1.0)

    for s, n in ((0, 10), (5, 10), (10, 10), (95, 100), (1, 400)):
        assert wilson_interval(s, n) == pytest.approx(reference(s, n), abs=1e-14)


def test_phase_grid_deterministic_csv(tmp_path):
    out1 = tmp_path / "a.csv"
    out2 = tmp_path / "b.csv"
    cfg1 = ExperimentConfig.from_dict({**SMALL_GRID, "output_path": str(out1)})
    cfg2 = ExperimentConfig.from_dict({**SMALL_GRID, "output_path": str(out2)})
    run_phase_grid(cfg1)
    run_phase_grid(cfg2)
    assert out1.read_bytes() == out2.read_bytes()
    header = out1.read_text().splitlines()[0]
    assert header == "m,k,trials,successes,wilson_lo,wilson_hi,median_err,median_phase_err,wall_ms"


def test_phase_grid_threads_do_not_change_bytes(tmp_path):
    out1 = tmp_path / "t1.csv"
    out2 = tmp_path / "t2.csv"
    run_phase_grid(ExperimentConfig.from_dict({**SMALL_GRID, "output_path": str(out1)}), threads=1)
    run_phase_grid(ExperimentConfig.from_dict({**SMALL_GRID, "output_path": str(out2)}), threads=2)
    assert out1.read_bytes() == out2.read_bytes()


def test_phase_grid_resumes_after_interrupt(tmp_path):
    out_full = tmp_path / "full.csv"
    run_phase_grid(ExperimentConfig.from_dict({**SMALL_GRID, "output_path": str(out_full)}))

    out_resume = tmp_path / "resume.csv"
    cfg = ExperimentConfig.from_dict({**SMALL_GRID, "output_path": str(out_resume)})
    with pytest.raises(InterruptedError):
        run_phase_grid(cfg, fail_after=1)
    assert os.path.exists(str(out_resume) + ".partial.jsonl")

    calls = []
    import affinepr.harness as hmod

    original = hmod.run_cell

    def counting(config, m, k, eps):
        calls.append((m, k))
        return original(config, m, k, eps)

    hmod.run_cell = counting
    try:
        cfg2 = ExperimentConfig.from_dict({**SMALL_GRID, "output_path": str(out_resume)})
        run_phase_grid(cfg2)
    finally:
        hmod.run_cell = original
    assert len(calls) == 1  # first cell was loaded from the partial file
    assert out_resume.read_bytes() == out_full.read_bytes()
    assert not os.path.exists(str(out_resume) + ".partial.jsonl")


def test_noise_curve_runs_and_fits(tmp_path):
    cfg = ExperimentConfig.from_dict(
        {
            "experiment": "noise_curve",
            "field": "real",
            "n": 16,
            "k_list": [2],
            "m_list": [32],
            "trials_per_cell": 6,
            "epsilon_list": [0.0, 0.05, 0.1],
            "bias": {"kind": "constant", "c": 1.0},
            "master_seed": 7,
            "solver": {"restarts": 1, "restart_seed": 2},
            "output_path": str(tmp_path / "curve.csv"),
        }
    )
    result = run_noise_curve(cfg)
    assert len(result.cells) == 3
    assert result.cells[0].median_plain_error <= 1e-5
    assert np.isfinite(result.slope)
    text = (tmp_path / "curve.csv").read_text()
    assert text.startswith("epsilon,trials,successes")


def test_impossibility_demo_identity_and_growth():
    cfg = ExperimentConfig.from_dict(
        {
            "experiment": "impossibility",
            "field": "real",
            "n": 32,
            "k_list": [2],
            "m_list": [24],
            "trials_per_cell": 1,
            "bias": {"kind": "constant", "c": 1.0},
            "master_seed": 11,
            "solver": {"restarts": 1, "restart_seed": 2},
        }
    )
    rep = run_impossibility_demo(cfg)
    assert max(rep.collision_residuals) <= 1e-10
    assert rep.alias_errors[-1] >= 10 * rep.alias_errors[0]
    # at r=1 the instance is inside the affine recovery regime
    assert rep.sparse_errors[0] <= 1e-4


def test_impossibility_requires_m_le_n():
    cfg = ExperimentConfig.from_dict(
        {
            "experiment": "impossibility",
            "field": "real",
            "n": 8,
            "k_list": [1],
            "m_list": [12],
            "trials_per_cell": 1,
            "master_seed": 1,
        }
    )
    with pytest.raises(ValueError):
        run_impossibility_demo(cfg)


def test_run_srip_and_ripmap_smoke():
    cfg = ExperimentConfig.from_dict(
        {
            "experiment": "srip",
            "field": "real",
            "n": 24,
            "k_list": [2],
            "m_list": [20],
            "trials_per_cell": 50,
            "master_seed": 5,
        }
    )
    est_a, est_ab = run_srip(cfg)
    assert 0 <= est_a.lower_hat <= est_a.upper_hat
    assert est_ab.config["last_coord_free"]

    cfg2 = ExperimentConfig.from_dict(
        {
            "experiment": "ripmap",
            "field": "complex",
            "n": 16,
            "k_list": [2],
            "m_list": [60],
            "trials_per_cell": 100,
            "bias": {"kind": "complex_gaussian"},
            "master_seed": 6,
        }
    )
    est = run_ripmap(cfg2)
    assert 0 < est.lower_hat <= est.upper_hat


def test_run_lemma_suite_clean():
    cfg = ExperimentConfig.from_dict(
        {
            "experiment": "lemma_suite",
            "field": "real",
            "n": 8,
            "k_list": [2],
            "m_list": [8],
            "trials_per_cell": 400,
            "master_seed": 13,
        }
    )
    summary = run_lemma_suite(cfg)
    assert summary["decompose_failures"] == 0
    assert summary["lifted_violations"] == 0
    assert summary["moment_failures"] == 0


def test_save_load_roundtrip(tmp_path):
    inst = make_instance("complex", 10, 2, 8, SeedSpec(21, ("io",)), with_intensity=True)
    path = tmp_path / "inst.json"
    save_instance(str(path), inst)
    loaded = load_instance(str(path))
    assert loaded.ensemble.field == "complex"
    assert np.array_equal(loaded.ensemble.A, inst.ensemble.A)
    assert np.array_equal(loaded.ensemble.b, inst.ensemble.b)
    assert np.array_equal(loaded.x0, inst.x0)
    assert np.array_equal(loaded.w, inst.w)
    assert np.array_equal(loaded.y, inst.y)
    assert np.array_equal(loaded.ytilde, inst.ytilde)
    assert loaded.k == inst.k
    regen = regenerate_instance(loaded.ensemble.seed_meta)
    assert np.array_equal(regen.ensemble.A, inst.ensemble.A)
    assert np.array_equal(regen.y, inst.y)


def test_load_rejects_truncation_and_tampering(tmp_path):
    inst = make_instance("real", 6, 1, 5, SeedSpec(22))
    path = tmp_path / "inst.json"
    save_instance(str(path), inst)
    raw = path.read_text()

    truncated = tmp_path / "trunc.json"
    truncated.write_text(raw[: len(raw) // 2])
    with pytest.raises(InstanceFormatError):
        load_instance(str(truncated))

    doc = json.loads(raw)
    doc["payload"]["k"] = 3
    tampered = tmp_path / "tampered.json"
    tampered.write_text(json.dumps(doc))
    with pytest.raises(InstanceFormatError, match="checksum"):
        load_instance(str(tampered))

    doc2 = json.loads(raw)
    doc2["version"] = 99
    wrong = tmp_path / "wrong.json"
    wrong.write_text(json.dumps(doc2))
    with pytest.raises(InstanceFormatError, match="version"):
        load_instance(str(wrong))


def test_csv_number_format(tmp_path):
    cfg = ExperimentConfig.from_dict({**SMALL_GRID, "m_list": [24]})
    cells = run_phase_grid(cfg)
    path = tmp_path / "fmt.csv"
    write_phase_grid_csv(str(path), cells)
    lines = path.read_text().split("\n")
    assert lines[-1] == ""  # trailing LF
    row = lines[1].split(",")
    assert row[0] == "24" and row[1] == "2"
    assert row[-1] == "0"  # deterministic wall_ms column


def test_run_cell_trial_metrics():
    cfg = ExperimentConfig.from_dict(SMALL_GRID)
    cell, trials = run_cell(cfg, 24, 2, 0.0)
    assert cell.trial_count == len(trials) == 4
    assert all(t.plain >= 0 for t in trials)
