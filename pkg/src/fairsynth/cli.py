"""Command-line front end.

Exit status: 0 on success, 1 on invalid flags or input files (one-line
diagnostic on stderr), 2 on errors raised while computing.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .divergence import bounds_report, group_bounds_report
from .errors import (
    CardinalityError, ConfigError, EmptyInputError, FairSynthError, IngestError, SchemaError,
    ValidationError,
)
from .fairmetrics import confusion_by_group, fairness_report
from .harness import ExperimentConfig, run_and_summarize, sweep_csv, threshold_grid
from .mitigators import RejectOptionParams, reject_option
from .models import ForestParams, LogRegParams, model_from_dict, predict, train_model
from .oversample import Strategy, make_plan, apply_plan
from .tabular import CELL_KEYS, CELLS, Encoder, cell_counts, load_schema, read_csv

MODEL_FORMAT = "fairsynth-model/1"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(path)
    return p


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _load(args):
    schema = load_schema(_existing(args.schema))
    return read_csv(_existing(args.data), schema)


# -- commands ---------------------------------------------------------------------


def cmd_describe(args):
    raw = _load(args)
    ds = Encoder.fit(raw).transform(raw)
    c = cell_counts(ds)
    doc = c.as_dict()
    doc["n"] = c.n
    if args.out:
        _emit(_json(doc), args.out)
    fmt = lambda v: "undefined" if v is None else f"{v:.4f}"
    print(f"rows: {c.n}")
    for cell, label in (("PF", "privileged favored"), ("PU", "privileged unfavored"),
                        ("UF", "unprivileged favored"), ("UU", "unprivileged unfavored")):
        print(f"{cell} ({label}): {getattr(c, cell)}")
    print(f"base rate privileged: {fmt(c.r_p)}")
    print(f"base rate unprivileged: {fmt(c.r_u)}")
    print(f"base rate gap: {fmt(c.gap)}")


def cmd_debias(args):
    if args.k < 1:
        raise UsageError("--k must be >= 1")
    strategy = Strategy.parse(args.strategy)
    data_path = _existing(args.data)
    raw = read_csv(data_path, load_schema(_existing(args.schema)))
    enc = Encoder.fit(raw)
    ds = enc.transform(raw)
    plan = make_plan(ds, strategy, args.k, args.seed)
    out = apply_plan(ds, plan)

    schema = raw.schema
    with open(data_path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        originals = [rec for rec in reader if rec and any(c.strip() for c in rec)]
    feats = [n for n, _ in schema.feature_columns]
    synth = enc.inverse_transform(out.X[ds.n:])
    label_raw = {1: enc.label_values[1], 0: enc.label_values[0]}
    group_raw = {1: enc.group_values[1], 0: enc.group_values[0]}

    cols = header + (["synthetic"] if args.mark_synthetic else [])
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for rec in originals:
            w.writerow(rec + (["0"] if args.mark_synthetic else []))
        for i, values in enumerate(synth):
            row = dict(zip(feats, values))
            row[schema.label_column] = label_raw[int(out.y[ds.n + i])]
            row[schema.protected_column] = group_raw[int(out.g[ds.n + i])]
            rec = [row.get(h, "") for h in header]
            w.writerow(rec + (["1"] if args.mark_synthetic else []))
    if args.plan_out:
        Path(args.plan_out).write_text(plan.to_json() + "\n", encoding="utf-8")
    print(f"wrote {ds.n + plan.total} rows ({plan.total} synthetic) to {args.out}")


def _model_params(args):
    if args.classifier == "forest":
        return ForestParams(n_trees=args.n_trees, max_depth=args.max_depth, min_leaf=args.min_leaf,
                            seed=args.seed)
    return LogRegParams(learning_rate=args.learning_rate, l2=args.l2, max_iters=args.max_iters,
                        tol=args.tol)


def cmd_train(args):
    try:
        params = _model_params(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    raw = _load(args)
    enc = Encoder.fit(raw)
    model = train_model(enc.transform(raw), args.classifier, params)
    doc = {"format": MODEL_FORMAT, "model": model.to_dict(), "encoder": enc.to_dict()}
    Path(args.out).write_text(json.dumps(doc) + "\n", encoding="utf-8")
    print(f"wrote {args.classifier} model to {args.out}")


def _load_model(args):
    doc = json.loads(_existing(args.model).read_text(encoding="utf-8"))
    if doc.get("format") != MODEL_FORMAT:
        raise ConfigError(f"{args.model}: not a fairsynth model file")
    enc = Encoder.from_dict(doc["encoder"])
    if args.schema:
        schema = load_schema(_existing(args.schema))
        if schema != enc.schema:
            raise SchemaError("--schema differs from the schema the model was trained with")
    raw = read_csv(_existing(args.data), enc.schema)
    return model_from_dict(doc["model"]), enc.transform(raw)


def cmd_eval(args):
    if not 0 <= args.threshold <= 1:
        raise UsageError("--threshold must lie in [0, 1]")
    if args.reject_margin is not None and not 0 < args.reject_margin <= 0.5:
        raise UsageError("--reject-margin must lie in (0, 0.5]")
    model, ds = _load_model(args)
    if args.reject_margin is None:
        pred = predict(model, ds.X, args.threshold)
    else:
        pred = reject_option(model.score(ds.X), ds.g, RejectOptionParams(args.reject_margin, args.threshold))
    gc = confusion_by_group(ds.y, pred, ds.g)
    doc = {"threshold": args.threshold, "reject_margin": args.reject_margin,
           "confusion": {"privileged": asdict(gc.privileged), "unprivileged": asdict(gc.unprivileged)},
           "report": fairness_report(gc, ds.y, pred).as_dict()}
    _emit(_json(doc), args.out)


def cmd_sweep(args):
    if not (0 <= args.start <= args.stop <= 1 and args.step > 0):
        raise UsageError("need 0 <= --start <= --stop <= 1 and --step > 0")
    model, ds = _load_model(args)
    scores = model.score(ds.X)
    from .fairmetrics import evaluate
    rows = [(t, evaluate(ds.y, (scores >= t).astype(np.int8), ds.g))
            for t in threshold_grid(args.start, args.stop, args.step)]
    _emit(sweep_csv([rows]), args.out)


def cmd_experiment(args):
    config = ExperimentConfig.from_file(_existing(args.config))
    if args.jobs:
        from dataclasses import replace
        config = replace(config, n_jobs=args.jobs)
    summary, _ = run_and_summarize(config, args.out_dir)
    print(f"wrote summary for {len(summary.arms)} arm(s) x {len(summary.seeds)} run(s) to {args.out_dir}")


def cmd_divergence(args):
    if not 0 < args.delta < 1:
        raise UsageError("--delta must lie in (0, 1)")
    raw = _load(args)
    if args.data_b:
        raw_b = read_csv(_existing(args.data_b), raw.schema)
        enc = Encoder.fit(raw.concat(raw_b))
        a, b = enc.transform(raw), enc.transform(raw_b)
        report = bounds_report(a.situational_X, b.situational_X, args.vc_dim, args.delta, args.seed)
    else:
        ds = Encoder.fit(raw).transform(raw)
        report = group_bounds_report(ds, args.delta, args.seed, args.vc_dim)
    _emit(_json(report.as_dict()), args.out)


# -- parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fairsynth", description="De-bias tabular data with group-targeted SMOTE.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def data_args(sp, schema_required=True):
        sp.add_argument("--data", required=True)
        sp.add_argument("--schema", required=schema_required)

    sp = sub.add_parser("describe", help="cell counts and base rates")
    data_args(sp)
    sp.add_argument("--out", help="also write the counts as JSON")
    sp.set_defaults(func=cmd_describe)

    sp = sub.add_parser("debias", help="write an oversampled CSV and its plan")
    data_args(sp)
    sp.add_argument("--strategy", required=True, choices=[s.value for s in Strategy])
    sp.add_argument("--k", type=int, default=5, help="SMOTE neighbors (default 5)")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--plan-out")
    sp.add_argument("--mark-synthetic", action="store_true",
                    help="append a 0/1 'synthetic' provenance column")
    sp.set_defaults(func=cmd_debias)

    sp = sub.add_parser("train", help="train a classifier and save it as JSON")
    data_args(sp)
    sp.add_argument("--classifier", choices=["logreg", "forest"], default="logreg")
    sp.add_argument("--learning-rate", type=float, default=0.1)
    sp.add_argument("--l2", type=float, default=1e-4)
    sp.add_argument("--max-iters", type=int, default=2000)
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.add_argument("--n-trees", type=int, default=100)
    sp.add_argument("--max-depth", type=int, default=8)
    sp.add_argument("--min-leaf", type=int, default=5)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="fairness report of a model at one threshold")
    sp.add_argument("--model", required=True)
    data_args(sp, schema_required=False)
    sp.add_argument("--threshold", type=float, default=0.5)
    sp.add_argument("--reject-margin", type=float, help="apply reject option with this margin")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("sweep", help="per-threshold metrics as CSV")
    sp.add_argument("--model", required=True)
    data_args(sp, schema_required=False)
    sp.add_argument("--start", type=float, default=0.0)
    sp.add_argument("--stop", type=float, default=0.5)
    sp.add_argument("--step", type=float, default=0.01)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("experiment", help="repeated multi-arm experiment from a config")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--jobs", type=int, default=0, help="worker processes (default: config value)")
    sp.set_defaults(func=cmd_experiment)

    sp = sub.add_parser("divergence", help="empirical H-divergence and bound terms")
    data_args(sp)
    sp.add_argument("--data-b", help="second dataset; default compares the two groups of --data")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--delta", type=float, default=0.05)
    sp.add_argument("--vc-dim", type=int)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_divergence)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:          # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"file not found: {exc.filename or exc}", file=sys.stderr)
        return 1
    except (SchemaError, CardinalityError) as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 1
    except (IngestError, EmptyInputError, ConfigError, ValidationError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1
    except (FairSynthError, ValueError, ArithmeticError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
