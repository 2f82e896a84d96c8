import csv
import json

import numpy as np
import pytest

from fairsynth.divergence import DivergenceReport, group_bounds_report
from fairsynth.errors import ConfigError, InsufficientSupportError, PairingError
from fairsynth.fairmetrics import FairnessReport, balanced_accuracy_threshold, evaluate
from fairsynth.fixtures import bundled
from fairsynth.harness import (
    CSV_COLUMNS, Arm, ArmRun, ExperimentConfig, prepare_split, run_and_summarize, run_arm,
    run_experiment, summarize, threshold_grid,
)
from fairsynth.models import train_logreg
from fairsynth.tabular import load_schema, read_csv

GRID = threshold_grid(0.0, 0.5, 0.05)


def config(arms=("baseline", "oversample"), n_runs=2, **kw):
    return ExperimentConfig(bundled("biased.csv"), bundled("biased.yaml"),
                            tuple(Arm.from_config(a) for a in arms), n_runs=n_runs,
                            thresholds=GRID, **kw)


def test_threshold_grid_default():
    grid = threshold_grid()
    assert len(grid) == 51 and grid[0] == 0.0 and grid[-1] == 0.5 and grid[1] == 0.01


def test_config_validation():
    with pytest.raises(ConfigError):
        config(n_runs=0)
    with pytest.raises(ConfigError):
        ExperimentConfig(bundled("biased.csv"), bundled("biased.yaml"), (Arm.from_config("baseline"),),
                         thresholds=(0.3, 0.1))
    with pytest.raises(ConfigError):
        config(arms=("baseline", "baseline"))
    with pytest.raises(ConfigError):
        config(classifier="svm")
    with pytest.raises(ConfigError):
        config(classifier_params={"learning_rate": -1})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"schema": "x.yaml"})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"data": "a", "schema": "b", "bogus": 1})


def test_config_file_paths_are_relative_to_config():
    cfg = ExperimentConfig.from_file(bundled("biased_experiment.yaml"))
    assert cfg.data == bundled("biased.csv") and cfg.n_runs == 10
    assert cfg.seeds == tuple(range(10))
    assert [a.kind for a in cfg.arms] == ["baseline", "oversample", "reweigh", "reject_option"]


def test_baseline_arm_equals_manual_composition():
    cfg = config(arms=("baseline",))
    raw = read_csv(cfg.data, load_schema(cfg.schema_path))
    run = run_arm(cfg, cfg.arms[0], seed=3, raw=raw)

    split = prepare_split(raw, cfg.test_fraction, 3)
    model = train_logreg(split.train)
    scores = model.score(split.test.X)
    sweep = [(t, evaluate(split.test.y, (scores >= t).astype(int), split.test.g)) for t in GRID]
    t = balanced_accuracy_threshold(sweep)
    assert run.threshold == t
    assert run.report == dict(sweep)[t]
    assert run.divergence == group_bounds_report(split.train, cfg.delta, 3)


def test_arms_share_the_split(biased):
    cfg = config(arms=("baseline", "oversample", "reweigh"))
    raw = read_csv(cfg.data, load_schema(cfg.schema_path))
    runs = [run_arm(cfg, arm, 5, raw=raw) for arm in cfg.arms]
    assert len({r.fingerprint for r in runs}) == 1
    a = prepare_split(raw, cfg.test_fraction, 5)
    b = prepare_split(raw, cfg.test_fraction, 5)
    assert np.array_equal(a.test.X, b.test.X) and a.fingerprint == b.fingerprint
    assert prepare_split(raw, cfg.test_fraction, 6).fingerprint != a.fingerprint


def _equal_rate_csv(tmp_path):
    rng = np.random.default_rng(0)
    path = tmp_path / "equal.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["f1", "f2", "grp", "lab"])
        for grp, lab, count in (("p", "yes", 20), ("p", "no", 20), ("u", "yes", 10), ("u", "no", 10)):
            for _ in range(count):
                w.writerow([f"{rng.normal():.4f}", f"{rng.normal():.4f}", grp, lab])
    schema = tmp_path / "equal.yaml"
    schema.write_text(
        "columns:\n  - {name: f1, kind: numeric}\n  - {name: f2, kind: numeric}\n"
        "  - {name: grp, kind: categorical}\n  - {name: lab, kind: categorical}\n"
        "label_column: lab\nfavorable_value: 'yes'\nprotected_column: grp\nprivileged_value: p\n")
    return path, schema


def test_oversample_arm_without_gap_matches_baseline(tmp_path):
    data, schema = _equal_rate_csv(tmp_path)
    cfg = ExperimentConfig(data, schema, (Arm.from_config("baseline"), Arm.from_config("oversample")),
                           n_runs=1, thresholds=GRID, test_fraction=0.5)
    base, over = run_experiment(cfg)
    assert over.plan["targets"] == {"PF": 0, "PU": 0, "UF": 0, "UU": 0}
    assert base.report == over.report and base.threshold == over.threshold
    assert [r for _, r in base.sweep] == [r for _, r in over.sweep]


def test_errors_are_annotated_with_arm_and_seed(tmp_path):
    path = tmp_path / "thin.csv"
    rows = [("1.0", "p", "yes")] * 6 + [("2.0", "p", "no")] * 6 + [("3.0", "u", "yes")] * 2 + \
           [("4.0", "u", "no")] * 8
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "grp", "lab"])
        w.writerows(rows)
    schema = tmp_path / "thin.yaml"
    schema.write_text("columns:\n  - {name: x, kind: numeric}\n  - {name: grp, kind: categorical}\n"
                      "  - {name: lab, kind: categorical}\nlabel_column: lab\nfavorable_value: 'yes'\n"
                      "protected_column: grp\nprivileged_value: p\n")
    cfg = ExperimentConfig(path, schema, (Arm.from_config("oversample"),), n_runs=1,
                           thresholds=GRID, test_fraction=0.5)
    with pytest.raises(InsufficientSupportError, match="arm 'oversample', seed 0"):
        run_experiment(cfg)


def _fake_run(arm, seed, value, fingerprint="fp"):
    rep = FairnessReport(value, 1.0, value, -value, 0.0, 0.1, 0.8, 0.7)
    div = DivergenceReport(0.1, 0.5, 3, 100, 0.05, 0.3, 0.3)
    return ArmRun(arm, seed, f"{fingerprint}{seed}", [], 0.3, rep, div)


def test_summarize_mean_and_stderr():
    s = summarize([_fake_run("a", 0, 0.2), _fake_run("a", 1, 0.4)])
    entry = s.arms["a"]["di_measure"]
    assert entry["mean"] == pytest.approx(0.3, abs=1e-12)
    assert entry["stderr"] == pytest.approx(0.1, abs=1e-12)
    assert entry["values"] == [0.2, 0.4]
    assert s.arms["a"]["abs_average_odds_difference"]["values"] == [0.2, 0.4]
    assert s.arms["a"]["accuracy"]["stderr"] == 0.0


def test_summarize_single_run_omits_t_tests():
    s = summarize([_fake_run("a", 0, 0.2), _fake_run("b", 0, 0.5)])
    assert s.arms["a"]["di_measure"] == {"values": [0.2], "mean": 0.2, "stderr": 0.0}
    assert s.t_tests == {}


def test_summarize_t_table_pairs_on_seeds():
    runs = [_fake_run("a", s, v) for s, v in enumerate((0.3, 0.5, 0.4))]
    runs += [_fake_run("b", s, v) for s, v in enumerate((0.1, 0.2, 0.4))]
    s = summarize(runs)
    entry = s.t_tests["di_measure"]["a vs b"]
    assert entry["n"] == 3 and entry["t"] > 0 and 0 < entry["p"] < 1
    assert s.t_tests["accuracy"]["a vs b"]["note"] == "degenerate variance"


def test_summarize_pairing_errors():
    with pytest.raises(PairingError):
        summarize([_fake_run("a", 0, 0.1), _fake_run("a", 1, 0.1), _fake_run("b", 0, 0.1)])
    with pytest.raises(PairingError):
        summarize([_fake_run("a", 0, 0.1), _fake_run("b", 1, 0.1)])
    with pytest.raises(PairingError):
        summarize([_fake_run("a", 0, 0.1), _fake_run("b", 0, 0.1, fingerprint="other")])


def test_outputs_are_deterministic(tmp_path):
    cfg = config(arms=("baseline", "oversample", "reweigh", "reject_option"))
    s1, _ = run_and_summarize(cfg, tmp_path / "a")
    s2, _ = run_and_summarize(cfg, tmp_path / "b")
    for name in ("summary.json", "sweep_baseline.csv", "sweep_oversample.csv",
                 "sweep_reweigh.csv", "sweep_reject_option.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    doc = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert set(doc["arms"]) == {"baseline", "oversample", "reweigh", "reject_option"}
    assert len(doc["arms"]["baseline"]["di_measure"]["values"]) == 2
    assert doc["runs"]["oversample"][0]["plan"]["strategy"] == "expand-unprivileged-favored"
    assert doc["runs"]["reject_option"][0]["margin"] in (0.05, 0.1, 0.15, 0.2)
    header = (tmp_path / "a" / "sweep_baseline.csv").read_text().splitlines()[0]
    assert header.split(",") == [c for c, _ in CSV_COLUMNS]


def test_parallel_runs_match_serial(tmp_path):
    cfg = config()
    serial = summarize(run_experiment(cfg), cfg).to_json()
    from dataclasses import replace
    par_cfg = replace(cfg, n_jobs=2)
    parallel = summarize(run_experiment(par_cfg), cfg).to_json()
    assert serial == parallel
