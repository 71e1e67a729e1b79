import json
import warnings

import numpy as np
import pytest

from qevorec.errors import ArgumentError
from qevorec.harness import EXPERIMENTS, ExperimentConfig, emit_plot_data, run_experiment
from qevorec.harness import experiments as ex
from qevorec.harness.report import EvalReport, Panel, RunResult, read_cells, read_panel
from qevorec.mfrec import TrainConfig, rms_deviation

FAST = TrainConfig(f=5, lam=0.3, alpha=0.01, max_iters=150)


def small(name, **kw):
    kw.setdefault("scale", 0.04)
    kw.setdefault("train", FAST)
    kw.setdefault("repetitions", 1)
    return ExperimentConfig(name, **kw)


def strip_clock(d):
    # wall-clock fields are the only permitted difference between reruns
    if isinstance(d, dict):
        return {
            k: strip_clock(v)
            for k, v in d.items()
            if k not in ("timing", "selection_seconds") and not k.startswith("tau_") and k != "ratio"
        }
    if isinstance(d, list):
        return [strip_clock(v) for v in d]
    return d


# -- config ------------------------------------------------------------------------


def test_config_validation():
    with pytest.raises(ArgumentError):
        ExperimentConfig("fig99")
    for s in (0.0, 1.5):
        with pytest.raises(ArgumentError):
            ExperimentConfig("fig2-discord", scale=s)
    cfg = ExperimentConfig("fig2-discord")
    assert cfg.size(200) == 200 and cfg.size(100) == 100
    assert ExperimentConfig("fig2-discord", scale=0.1).size(200) == 100


def test_config_json_round_trip():
    cfg = ExperimentConfig("fig5-noise", scale=0.1, train=FAST, seed=4)
    back = ExperimentConfig.from_json(json.loads(json.dumps(cfg.to_json())))
    assert back == cfg


def test_train_for():
    assert small("fig2-discord").train_for() is FAST
    cfg = ExperimentConfig("fig2-discord", seed=9)
    assert cfg.train_for() is None
    assert cfg.train_for(FAST).seed == 9


# -- every experiment at tiny scale ---------------------------------------------


@pytest.mark.parametrize("name", EXPERIMENTS)
def test_experiment_smoke(name, tmp_path):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        report = run_experiment(small(name, out_dir=str(tmp_path)))
    assert (tmp_path / "report.json").exists() and (tmp_path / "cells.csv").exists()
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["name"] == name
    assert set(doc["timing"]) >= {"db_build", "train", "predict", "direct_compute"}
    assert doc["panels"] == sorted(report.panels)
    for p in report.panels:
        assert (tmp_path / f"panel-{p}.csv").read_text().startswith("x,y,series\n")
    # report delta equals the RMS recomputed from the per-cell file
    cells = read_cells(tmp_path / "cells.csv")
    for r in report.runs:
        a, p = cells[r.label]
        assert abs(rms_deviation(p, a) - r.delta) <= 1e-12


def test_reproducible_reports():
    a = run_experiment(small("fig2-discord"))
    b = run_experiment(small("fig2-discord"))
    assert strip_clock(a.to_json()) == strip_clock(b.to_json())
    for ra, rb in zip(a.runs, b.runs):
        assert ra.predicted.tobytes() == rb.predicted.tobytes()


def test_reproducible_with_selection():
    cfg = ExperimentConfig("fig2-negativity", scale=0.04)
    a, b = run_experiment(cfg), run_experiment(cfg)
    assert strip_clock(a.to_json()) == strip_clock(b.to_json())
    assert "selection" in a.runs[0].params


def test_seed_changes_report():
    a = run_experiment(small("fig2-discord", seed=1))
    b = run_experiment(small("fig2-discord", seed=2))
    assert a.delta("masked50") != b.delta("masked50")


# -- report files and panels ---------------------------------------------------------


def test_scatter_panel_round_trip(tmp_path):
    report = run_experiment(small("fig2-entropy", out_dir=str(tmp_path)))
    x, y, s = read_panel(tmp_path / "panel-masked50.csv")
    assert set(s) == {"prediction", "ideal"}
    pred = s == "prediction"
    assert abs(rms_deviation(y[pred], x[pred]) - report.delta("masked50")) <= 1e-12
    ideal = s == "ideal"
    assert np.array_equal(x[ideal], y[ideal]) and ideal.sum() == 2


def test_sweep_panel_sorted(tmp_path):
    report = run_experiment(small("fig5-noise", out_dir=str(tmp_path)))
    x, y, _ = read_panel(tmp_path / "panel-e.csv")
    assert list(x) == sorted(ex.NOISE_ETAS)
    assert np.allclose(y, [report.delta(f"eta{e:g}") for e in ex.NOISE_ETAS], rtol=0, atol=1e-15)


def test_sweep_sorts_unsorted_input():
    p = Panel.sweep("s", [3.0, 1.0, 2.0], [30, 10, 20])
    assert [pt[:2] for pt in p.points] == [(1.0, 10.0), (2.0, 20.0), (3.0, 30.0)]


def test_emit_unknown_panel(tmp_path):
    rep = EvalReport("x", {})
    with pytest.raises(ArgumentError):
        emit_plot_data(rep, "nope", tmp_path)


def test_full_precision_output(tmp_path):
    v = 0.1 + 0.2
    rep = EvalReport("x", {})
    rep.add_run(RunResult("r", np.array([0]), np.array([0]), np.array([v]), np.array([1 / 3])))
    rep.write(tmp_path)
    line = (tmp_path / "cells.csv").read_text().splitlines()[1]
    assert float(line.split(",")[3]) == v and float(line.split(",")[4]) == 1 / 3


def test_flags():
    rep = EvalReport("x", {}, fidelity_check=True)
    rep.add_run(RunResult("a", np.arange(3), np.zeros(3, int), np.array([0.5, 0.2, 0.9]), np.array([1.1, -0.1, 0.5])))
    assert rep.flags == {"divergence": False, "degenerate_scale": False, "fidelity_out_of_range": 2}
    rep.add_run(RunResult("b", np.arange(2), np.zeros(2, int), np.zeros(2), np.zeros(2), scaled=True))
    assert rep.flags["degenerate_scale"] and rep.flagged
    rep2 = EvalReport("y", {})
    rep2.add_run(RunResult("c", np.arange(1), np.zeros(1, int), np.ones(1), np.ones(1), trace={"stop_reason": "diverged"}))
    assert rep2.flags["divergence"] and rep2.flagged


def test_divergence_is_flagged():
    rep = run_experiment(small("fig2-discord", train=TrainConfig(f=5, alpha=50.0, max_iters=300)))
    assert rep.flags["divergence"]


# -- specific experiments -------------------------------------------------------------


def test_werner_report_contents():
    rep = run_experiment(small("fig4-werner"))
    assert sorted(rep.panels) == ["discord", "negativity"]
    neg = rep.run("negativity-werner")
    assert np.allclose(neg.actual, np.maximum(0, (3 * np.array(ex.WERNER_EPS) - 1) / 2))
    # the database cells on the CNOT column are the analytic curve
    assert rep.metrics["negativity"]["cell_vs_curve_max_gap"] <= 1e-10
    assert rep.metrics["discord"]["cell_vs_curve_max_gap"] <= 1e-8
    for k in ("max_abs_pred_2n_below_third", "pred_d_at_0.2"):
        assert np.isfinite(rep.metrics[k])


def test_timing_bookkeeping():
    rep = ex.run_timing_study(small("fig6-timing", repetitions=3))
    assert len(rep.runs) == len(ex.TIMING_CASES) * len(ex.TIMING_FRACTIONS)
    for r in rep.runs:
        p = r.params
        assert len(p["tau_cal_all"]) == len(p["tau_rs_all"]) == 3
        assert p["tau_cal"] == pytest.approx(np.median(p["tau_cal_all"]))
        assert p["tau_rs"] == pytest.approx(np.median(p["tau_rs_all"]))
        assert p["ratio"] == pytest.approx(p["tau_cal"] / p["tau_rs"])
        # database construction is booked separately, never inside tau_RS
        assert r.timing["direct_compute"] == p["tau_cal"]
        assert "db_build" not in r.timing
        assert p["direct_max_gap"] <= 1e-10
    assert rep.timing["db_build"] > 0


def test_binning_classifies_all_seen_columns():
    rep = run_experiment(small("appendix-binning", scale=0.1, train=None))
    assert rep.metrics["classified_columns"] > 0
    assert 0.0 <= rep.metrics["accuracy"] <= 1.0


def test_select_train_uses_known_cells_only():
    from qevorec import dbgen
    from qevorec.database import DatabaseSpec
    from qevorec.rng import Rng

    db = dbgen.build_unitary_db(DatabaseSpec(n_s=20, n_u=20, seed=1))
    masked = dbgen.mask_random(db, 100, Rng(1))
    cfg1, table = ex.select_train(masked, 0)
    # scrambling the hidden truth must not change the choice
    other = masked.copy()
    other.hidden_truth[~other.known_mask] = 123.0
    cfg2, table2 = ex.select_train(other, 0)
    assert cfg1 == cfg2 and table == table2
    assert len(table) == len(ex.SELECT_GRID)
    assert cfg1.alpha == pytest.approx(ex.step_size(masked))
