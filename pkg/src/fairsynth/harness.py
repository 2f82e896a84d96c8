"""Repeated, seeded experiment runs comparing mitigation arms.

For each seed the data is split once (stratified on group x label) and every
arm sees exactly that split, so per-seed results can be compared with paired
t-tests. Each arm: optionally mitigate or oversample the training part,
train a classifier, sweep thresholds on the test part, and read all metrics
at the threshold with the best balanced accuracy.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .divergence import DivergenceReport, group_bounds_report
from .errors import ConfigError, DegenerateVarianceError, FairSynthError, PairingError
from .fairmetrics import FairnessReport, balanced_accuracy_threshold, evaluate
from .mitigators import RejectOptionParams, reject_option, reweigh
from .models import ForestParams, LogRegParams, train_model
from .oversample import Strategy, oversample
from .stats import paired_t_test
from .tabular import Dataset, Encoder, RawTable, load_schema, read_csv, split_indices

log = logging.getLogger(__name__)

ARM_KINDS = ("baseline", "oversample", "reweigh", "reject_option")
DEFAULT_MARGINS = (0.05, 0.1, 0.15, 0.2)
CSV_COLUMNS = (
    ("threshold", None),
    ("accuracy", "accuracy"),
    ("balanced_accuracy", "balanced_accuracy"),
    ("di", "di_measure"),
    ("AOD", "average_odds_difference"),
    ("SPD", "statistical_parity_difference"),
    ("EOD", "equal_opportunity_difference"),
    ("Theil", "theil_index"),
)


@dataclass(frozen=True)
class Arm:
    name: str
    kind: str
    strategy: Strategy | None = None
    k_neighbors: int = 5
    margins: tuple = DEFAULT_MARGINS

    @classmethod
    def from_config(cls, entry) -> "Arm":
        if isinstance(entry, str):
            entry = {"kind": entry}
        entry = dict(entry)
        kind = entry.pop("kind", None) or entry.get("name")
        name = entry.pop("name", kind)
        if kind not in ARM_KINDS:
            raise ConfigError(f"arm {name!r}: unknown kind {kind!r}; choose from {ARM_KINDS}")
        strategy = None
        if kind == "oversample":
            strategy = Strategy.parse(entry.pop("strategy", Strategy.ExpandUnprivilegedFavored))
        k = int(entry.pop("k_neighbors", 5))
        margins = tuple(float(m) for m in entry.pop("margins", DEFAULT_MARGINS))
        if entry:
            raise ConfigError(f"arm {name!r}: unknown keys {sorted(entry)}")
        return cls(name, kind, strategy, k, margins)

    def to_dict(self) -> dict:
        out = {"name": self.name, "kind": self.kind}
        if self.kind == "oversample":
            out.update(strategy=self.strategy.value, k_neighbors=self.k_neighbors)
        if self.kind == "reject_option":
            out["margins"] = list(self.margins)
        return out


def threshold_grid(start=0.0, stop=0.5, step=0.01) -> tuple[float, ...]:
    count = int(round((stop - start) / step))
    return tuple(round(start + i * step, 10) for i in range(count + 1))


@dataclass(frozen=True)
class ExperimentConfig:
    data: Path
    schema_path: Path
    arms: tuple[Arm, ...]
    classifier: str = "logreg"
    classifier_params: dict = field(default_factory=dict)
    n_runs: int = 10
    seeds: tuple[int, ...] = ()
    thresholds: tuple[float, ...] = threshold_grid()
    test_fraction: float = 0.3
    delta: float = 0.05
    accuracy_budget: float = 0.03
    n_jobs: int = 1

    def __post_init__(self):
        if self.n_runs < 1:
            raise ConfigError("n_runs must be >= 1")
        seeds = tuple(self.seeds) or tuple(range(self.n_runs))
        if len(seeds) != self.n_runs:
            raise ConfigError(f"{len(seeds)} seeds given for n_runs={self.n_runs}")
        if len(set(seeds)) != len(seeds):
            raise ConfigError("seeds must be distinct")
        object.__setattr__(self, "seeds", seeds)
        ts = list(self.thresholds)
        if not ts or ts != sorted(ts) or ts[0] < 0 or ts[-1] > 1:
            raise ConfigError("threshold grid must be nonempty, sorted and within [0, 1]")
        if not self.arms:
            raise ConfigError("at least one arm is required")
        names = [a.name for a in self.arms]
        if len(set(names)) != len(names):
            raise ConfigError("arm names must be unique")
        if self.classifier not in ("logreg", "forest"):
            raise ConfigError(f"unknown classifier {self.classifier!r}")
        if not 0 < self.test_fraction < 1:
            raise ConfigError("test_fraction must lie in (0, 1)")
        try:
            self.model_params(0)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"classifier_params: {exc}") from None

    @classmethod
    def from_dict(cls, doc: dict, base_dir=".") -> "ExperimentConfig":
        base = Path(base_dir)
        doc = dict(doc)
        try:
            data = base / doc.pop("data")
            schema = base / doc.pop("schema")
        except KeyError as exc:
            raise ConfigError(f"config is missing {exc.args[0]!r}") from None
        arms = tuple(Arm.from_config(a) for a in doc.pop("arms", ["baseline", "oversample"]))
        grid = doc.pop("thresholds", None)
        if grid is None:
            thresholds = threshold_grid()
        elif isinstance(grid, dict):
            thresholds = threshold_grid(**{k: float(v) for k, v in grid.items()})
        else:
            thresholds = tuple(float(t) for t in grid)
        known = {"classifier", "classifier_params", "n_runs", "seeds", "test_fraction",
                 "delta", "accuracy_budget", "n_jobs"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        kwargs = dict(doc)
        if "seeds" in kwargs:
            kwargs["seeds"] = tuple(int(s) for s in kwargs["seeds"])
            kwargs.setdefault("n_runs", len(kwargs["seeds"]))
        kwargs.setdefault("classifier_params", {})
        return cls(data=data, schema_path=schema, arms=arms, thresholds=thresholds, **kwargs)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: config must be a mapping")
        return cls.from_dict(doc, path.parent)

    def model_params(self, seed: int):
        p = dict(self.classifier_params or {})
        if self.classifier == "forest":
            p.setdefault("seed", seed)
            return ForestParams(**p)
        return LogRegParams(**p)

    def to_dict(self) -> dict:
        return {
            "data": self.data.name, "schema": self.schema_path.name,
            "arms": [a.to_dict() for a in self.arms], "classifier": self.classifier,
            "classifier_params": dict(self.classifier_params), "n_runs": self.n_runs,
            "seeds": list(self.seeds), "thresholds": list(self.thresholds),
            "test_fraction": self.test_fraction, "delta": self.delta,
            "accuracy_budget": self.accuracy_budget,
        }


@dataclass(frozen=True)
class SplitData:
    train: Dataset
    test: Dataset
    fingerprint: str


def prepare_split(raw: RawTable, test_fraction: float, seed: int) -> SplitData:
    """Split raw rows, fit the encoder on the training rows only."""
    y, g = raw.labels_and_groups()
    tr, te = split_indices(y, g, test_fraction, seed)
    raw_tr = raw.subset(tr)
    enc = Encoder.fit(raw_tr)
    fp = hashlib.sha256(np.asarray(te, dtype=np.int64).tobytes()).hexdigest()[:16]
    return SplitData(enc.transform(raw_tr), enc.transform(raw.subset(te)), fp)


@dataclass
class ArmRun:
    arm: str
    seed: int
    fingerprint: str
    sweep: list
    threshold: float
    report: FairnessReport
    divergence: DivergenceReport
    plan: dict | None = None
    margin: float | None = None
    n_train: int = 0

    def metrics(self) -> dict:
        out = self.report.as_dict()
        aod = out["average_odds_difference"]
        out["abs_average_odds_difference"] = None if aod is None else abs(aod)
        out["threshold"] = self.threshold
        out["empirical_h_divergence"] = self.divergence.empirical_h_divergence
        out["favorable_gap_bound"] = self.divergence.favorable_gap_bound
        return out


def _sweep(scores, y, g, thresholds, margin=None):
    out = []
    for t in thresholds:
        if margin is None:
            pred = (scores >= t).astype(np.int8)
        else:
            pred = reject_option(scores, g, RejectOptionParams(margin, t))
        out.append((t, evaluate(y, pred, g)))
    return out


def _pick_margin(scores, ds: Dataset, thresholds, margins, budget):
    """Margin with the lowest di at its balanced-accuracy operating point on
    the training data, among margins losing at most ``budget`` balanced
    accuracy against plain thresholding. Ties go to the smaller margin."""
    def operating(margin):
        sw = _sweep(scores, ds.y, ds.g, thresholds, margin)
        t = balanced_accuracy_threshold(sw)
        return dict(sw)[t]

    ref = operating(None).balanced_accuracy or 0.0
    best, best_key = None, None
    for m in sorted(margins):
        rep = operating(m)
        bal = rep.balanced_accuracy or 0.0
        if bal < ref - budget:
            continue
        di = rep.di_measure if rep.di_measure is not None else math.inf
        if best_key is None or di < best_key:
            best, best_key = m, di
    return best if best is not None else min(margins)


def run_arm(config: ExperimentConfig, arm: Arm, seed: int, raw: RawTable | None = None,
            split: SplitData | None = None) -> ArmRun:
    if split is None:
        raw = raw if raw is not None else read_csv(config.data, load_schema(config.schema_path))
        split = prepare_split(raw, config.test_fraction, seed)
    try:
        train, test = split.train, split.test
        plan = None
        if arm.kind == "oversample":
            train, p = oversample(train, arm.strategy, arm.k_neighbors, seed)
            plan = p.to_dict()
        elif arm.kind == "reweigh":
            train = reweigh(train)
        model = train_model(train, config.classifier, config.model_params(seed))
        margin = None
        if arm.kind == "reject_option":
            margin = _pick_margin(model.score(train.X), train, config.thresholds,
                                  arm.margins, config.accuracy_budget)
        sweep = _sweep(model.score(test.X), test.y, test.g, config.thresholds, margin)
        t = balanced_accuracy_threshold(sweep)
        div = group_bounds_report(train, config.delta, seed)
    except FairSynthError as exc:
        raise type(exc)(f"arm {arm.name!r}, seed {seed}: {exc}") from exc
    return ArmRun(arm.name, seed, split.fingerprint, sweep, t, dict(sweep)[t], div,
                  plan, margin, train.n)


def _run_seed(args):
    config, raw, seed = args
    split = prepare_split(raw, config.test_fraction, seed)
    return [run_arm(config, arm, seed, split=split) for arm in config.arms]


def run_experiment(config: ExperimentConfig) -> list[ArmRun]:
    raw = read_csv(config.data, load_schema(config.schema_path))
    jobs = [(config, raw, s) for s in config.seeds]
    if config.n_jobs > 1:
        with ProcessPoolExecutor(config.n_jobs) as pool:
            per_seed = list(pool.map(_run_seed, jobs))
    else:
        per_seed = []
        for job in jobs:
            log.info("seed %s", job[2])
            per_seed.append(_run_seed(job))
    return [r for runs in per_seed for r in runs]


def _mean_stderr(values):
    vals = [v for v in values if v is not None]
    if not vals:
        return None, None
    n = len(vals)
    mean = math.fsum(vals) / n
    if n == 1:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in vals) / (n - 1)
    return mean, math.sqrt(var) / math.sqrt(n)


@dataclass
class ExperimentSummary:
    arms: dict          # arm -> metric -> {values, mean, stderr}
    seeds: list
    t_tests: dict       # metric -> "a vs b" -> {t, p, n}
    runs: dict          # arm -> list of per-run provenance
    config: dict | None = None

    def to_dict(self) -> dict:
        return {"config": self.config, "seeds": self.seeds, "arms": self.arms,
                "t_tests": self.t_tests, "runs": self.runs}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def summarize(runs: list[ArmRun], config: ExperimentConfig | None = None) -> ExperimentSummary:
    if not runs:
        raise ValueError("no runs to summarize")
    by_arm: dict[str, list[ArmRun]] = {}
    for r in runs:
        by_arm.setdefault(r.arm, []).append(r)
    for rs in by_arm.values():
        rs.sort(key=lambda r: r.seed)
    names = list(by_arm)
    seeds = [r.seed for r in by_arm[names[0]]]
    fps = [r.fingerprint for r in by_arm[names[0]]]
    for name in names[1:]:
        rs = by_arm[name]
        if len(rs) != len(seeds):
            raise PairingError(f"arm {name!r} has {len(rs)} runs, arm {names[0]!r} has {len(seeds)}")
        if [r.seed for r in rs] != seeds:
            raise PairingError(f"arm {name!r} was run on different seeds")
        if [r.fingerprint for r in rs] != fps:
            raise PairingError(f"arm {name!r} used different train/test splits")

    metrics = list(runs[0].metrics())
    per_arm = {}
    for name, rs in by_arm.items():
        per_metric = {}
        for m in metrics:
            values = [r.metrics()[m] for r in rs]
            mean, se = _mean_stderr(values)
            per_metric[m] = {"values": values, "mean": mean, "stderr": se}
        per_arm[name] = per_metric

    tests: dict = {}
    if len(seeds) >= 2:
        for m in metrics:
            table = {}
            for i, a in enumerate(names):
                for b in names[i + 1:]:
                    pairs = [(x, y) for x, y in zip(per_arm[a][m]["values"], per_arm[b][m]["values"])
                             if x is not None and y is not None]
                    key = f"{a} vs {b}"
                    if len(pairs) < 2:
                        table[key] = {"t": None, "p": None, "n": len(pairs), "note": "too few pairs"}
                        continue
                    try:
                        t, p = paired_t_test([x for x, _ in pairs], [y for _, y in pairs])
                        table[key] = {"t": t, "p": p, "n": len(pairs)}
                    except DegenerateVarianceError:
                        table[key] = {"t": None, "p": None, "n": len(pairs), "note": "degenerate variance"}
            tests[m] = table

    provenance = {
        name: [{"seed": r.seed, "split": r.fingerprint, "n_train": r.n_train,
                "plan": r.plan, "margin": r.margin, "divergence": r.divergence.as_dict()}
               for r in rs]
        for name, rs in by_arm.items()
    }
    return ExperimentSummary(per_arm, seeds, tests, provenance,
                             config.to_dict() if config is not None else None)


def sweep_csv(sweeps: list[list]) -> str:
    """Per-threshold CSV averaged across runs (undefined values skipped)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([c for c, _ in CSV_COLUMNS])
    for i, (t, _) in enumerate(sweeps[0]):
        row = [t]
        for _, attr in CSV_COLUMNS[1:]:
            mean, _ = _mean_stderr([getattr(s[i][1], attr) for s in sweeps])
            row.append("" if mean is None else repr(mean))
        w.writerow(row)
    return buf.getvalue()


def write_outputs(summary: ExperimentSummary, runs: list[ArmRun], out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "summary.json"]
    written[0].write_text(summary.to_json(), encoding="utf-8")
    for arm in summary.arms:
        sweeps = [r.sweep for r in sorted(runs, key=lambda r: r.seed) if r.arm == arm]
        p = out / f"sweep_{arm}.csv"
        p.write_text(sweep_csv(sweeps), encoding="utf-8")
        written.append(p)
    return written


def run_and_summarize(config: ExperimentConfig, out_dir=None):
    runs = run_experiment(config)
    summary = summarize(runs, config)
    if out_dir is not None:
        write_outputs(summary, runs, out_dir)
    return summary, runs
