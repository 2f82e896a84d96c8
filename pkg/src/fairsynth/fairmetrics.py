"""Group fairness and accuracy metrics from binary predictions.

Rates whose denominator is zero are reported as ``None`` rather than 0, so
a group without positives never looks perfectly fair. Group differences
are always unprivileged minus privileged.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np


@dataclass(frozen=True)
class Confusion:
    TP: int = 0
    FP: int = 0
    TN: int = 0
    FN: int = 0

    @property
    def total(self) -> int:
        return self.TP + self.FP + self.TN + self.FN

    @property
    def tpr(self):
        return _ratio(self.TP, self.TP + self.FN)

    @property
    def fpr(self):
        return _ratio(self.FP, self.FP + self.TN)

    @property
    def tnr(self):
        return _ratio(self.TN, self.TN + self.FP)

    @property
    def selection_rate(self):
        return _ratio(self.TP + self.FP, self.total)

    def __add__(self, other):
        return Confusion(self.TP + other.TP, self.FP + other.FP,
                         self.TN + other.TN, self.FN + other.FN)


@dataclass(frozen=True)
class GroupConfusion:
    privileged: Confusion
    unprivileged: Confusion

    @property
    def pooled(self) -> Confusion:
        return self.privileged + self.unprivileged


def _ratio(a, b):
    return a / b if b else None


def _diff(a, b):
    return None if a is None or b is None else a - b


def _as_binary(v, name):
    a = np.asarray(v)
    if a.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if not np.isin(a, (0, 1)).all():
        raise ValueError(f"{name} must be binary 0/1")
    return a.astype(np.int8)


def _confusion(t, p) -> Confusion:
    return Confusion(int(np.sum((t == 1) & (p == 1))), int(np.sum((t == 0) & (p == 1))),
                     int(np.sum((t == 0) & (p == 0))), int(np.sum((t == 1) & (p == 0))))


def confusion_by_group(y_true, y_pred, g) -> GroupConfusion:
    t = _as_binary(y_true, "y_true")
    p = _as_binary(y_pred, "y_pred")
    gg = _as_binary(g, "g")
    if not len(t) == len(p) == len(gg):
        raise ValueError(f"length mismatch: {len(t)}, {len(p)}, {len(gg)}")
    if len(t) == 0:
        raise ValueError("need at least one row")
    priv = gg == 1
    return GroupConfusion(_confusion(t[priv], p[priv]), _confusion(t[~priv], p[~priv]))


@dataclass(frozen=True)
class FairnessReport:
    statistical_parity_difference: float | None
    disparate_impact: float | None
    di_measure: float | None
    average_odds_difference: float | None
    equal_opportunity_difference: float | None
    theil_index: float | None
    accuracy: float
    balanced_accuracy: float | None

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def di_measure(sel_u, sel_p):
    """``1 - min(DI, 1/DI)`` written as ``1 - min/max`` of the two rates.

    This form is symmetric in the groups and stays defined (= 1) when only
    one group has a zero selection rate.
    """
    if sel_u is None or sel_p is None:
        return None
    hi = max(sel_u, sel_p)
    if hi == 0:
        return None
    return 1.0 - min(sel_u, sel_p) / hi


def theil_index(y_true, y_pred):
    """Generalized entropy index (alpha=1) over benefits ``b = yhat - y + 1``."""
    b = np.asarray(y_pred, dtype=float) - np.asarray(y_true, dtype=float) + 1.0
    mu = b.mean()
    if mu == 0:
        return None
    r = b / mu
    terms = np.zeros_like(r)
    nz = r > 0
    terms[nz] = r[nz] * np.log(r[nz])
    return float(max(terms.mean(), 0.0))


def fairness_report(gc: GroupConfusion, y_true, y_pred) -> FairnessReport:
    pr, un = gc.privileged, gc.unprivileged
    if pr.total == 0 or un.total == 0:
        raise ValueError("both groups must be nonempty")
    sel_p, sel_u = pr.selection_rate, un.selection_rate
    di = sel_u / sel_p if sel_p else None
    tpr_gap = _diff(un.tpr, pr.tpr)
    fpr_gap = _diff(un.fpr, pr.fpr)
    aod = None if tpr_gap is None or fpr_gap is None else 0.5 * (fpr_gap + tpr_gap)
    pooled = gc.pooled
    tpr, tnr = pooled.tpr, pooled.tnr
    bal = None if tpr is None or tnr is None else 0.5 * (tpr + tnr)
    return FairnessReport(
        statistical_parity_difference=sel_u - sel_p,
        disparate_impact=di,
        di_measure=di_measure(sel_u, sel_p),
        average_odds_difference=aod,
        equal_opportunity_difference=tpr_gap,
        theil_index=theil_index(y_true, y_pred),
        accuracy=(pooled.TP + pooled.TN) / pooled.total,
        balanced_accuracy=bal,
    )


def evaluate(y_true, y_pred, g) -> FairnessReport:
    return fairness_report(confusion_by_group(y_true, y_pred, g), y_true, y_pred)


def balanced_accuracy_threshold(sweep) -> float:
    """Threshold of the sweep entry with the highest balanced accuracy.

    ``sweep`` is a sequence of ``(threshold, FairnessReport)``. Ties go to
    the lower threshold; entries with undefined balanced accuracy are
    skipped unless all are undefined, in which case the lowest threshold
    is returned.
    """
    sweep = list(sweep)
    if not sweep:
        raise ValueError("empty sweep")
    best_t, best_v = None, -math.inf
    for t, rep in sorted(sweep, key=lambda e: e[0]):
        v = rep.balanced_accuracy
        if v is not None and v > best_v:
            best_t, best_v = t, v
    if best_t is None:
        best_t = min(t for t, _ in sweep)
    return best_t
