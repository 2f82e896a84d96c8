"""Group-targeted SMOTE oversampling.

Three strategies close the positive base-rate gap between the privileged
and unprivileged groups by adding synthetic rows to one or two
(group, label) cells:

* ``ExpandUnprivilegedFavored`` adds to UF until r_u' >= r_p
* ``ExpandPrivilegedUnfavored`` adds to PU until r_p' <= r_u
* ``Combined`` adds to both so each group reaches the pooled rate

Original rows are never touched; synthetic rows are appended after them.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import InsufficientSupportError, UnreachableTargetError
from .tabular import CELL_KEYS, CELLS, CellCounts, Dataset, cell_counts


class Strategy(enum.Enum):
    ExpandUnprivilegedFavored = "expand-unprivileged-favored"
    ExpandPrivilegedUnfavored = "expand-privileged-unfavored"
    Combined = "combined"

    @classmethod
    def parse(cls, value) -> "Strategy":
        if isinstance(value, cls):
            return value
        for s in cls:
            if value in (s.value, s.name):
                return s
        raise ValueError(f"unknown strategy {value!r}; choose from {[s.value for s in cls]}")


DONOR_CELLS = {
    Strategy.ExpandUnprivilegedFavored: ("UF",),
    Strategy.ExpandPrivilegedUnfavored: ("PU",),
    Strategy.Combined: ("UF", "PU"),
}


@dataclass(frozen=True)
class OversamplePlan:
    strategy: Strategy
    targets: dict = field(default_factory=dict)
    k_neighbors: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")
        targets = {c: int(self.targets.get(c, 0)) for c in CELLS}
        for c, t in targets.items():
            if t < 0:
                raise ValueError(f"negative target for cell {c}")
            if t and c not in DONOR_CELLS[self.strategy]:
                raise ValueError(f"strategy {self.strategy.value} does not permit adding to {c}")
        object.__setattr__(self, "targets", targets)

    @property
    def total(self) -> int:
        return sum(self.targets.values())

    def to_dict(self) -> dict:
        return {"strategy": self.strategy.value, "k_neighbors": self.k_neighbors,
                "seed": self.seed, "targets": dict(self.targets)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "OversamplePlan":
        return cls(Strategy.parse(doc["strategy"]), dict(doc["targets"]),
                   int(doc.get("k_neighbors", 5)), int(doc.get("seed", 0)))


def _ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


def target_counts(cells: CellCounts, strategy: Strategy) -> dict:
    """Synthetic rows per cell needed to close the base-rate gap.

    Pure arithmetic on the counts; whether a targeted cell can actually
    donate SMOTE rows is checked by :func:`check_support` / :func:`apply_plan`.

    All arithmetic is on integers: with D = PF*n_u - UF*n_p (proportional to
    r_p - r_u), the additions are ceil(D/PU) to UF, ceil(D/UF) to PU, or for
    the pooled target ceil(D/(PU+UU)) to UF and ceil(D/(PF+UF)) to PU.
    Nothing is added when D <= 0.
    """
    strategy = Strategy.parse(strategy)
    if cells.n_p == 0 or cells.n_u == 0:
        raise InsufficientSupportError("both groups must be nonempty")
    gap = cells.PF * cells.n_u - cells.UF * cells.n_p
    out = {c: 0 for c in CELLS}
    if gap <= 0:
        return out

    if strategy is Strategy.ExpandUnprivilegedFavored:
        if cells.PU == 0:
            raise UnreachableTargetError(
                "privileged base rate is 1; no number of favorable unprivileged rows reaches it")
        out["UF"] = _ceil_div(gap, cells.PU)
    elif strategy is Strategy.ExpandPrivilegedUnfavored:
        if cells.UF == 0:
            raise UnreachableTargetError(
                "unprivileged base rate is 0; no number of unfavorable privileged rows reaches it")
        out["PU"] = _ceil_div(gap, cells.UF)
    else:
        # gap > 0 implies PF > 0 and UU > 0, so both denominators are positive
        out["UF"] = _ceil_div(gap, cells.PU + cells.UU)
        out["PU"] = _ceil_div(gap, cells.PF + cells.UF)
    return out


def check_support(cells: CellCounts, targets: dict) -> None:
    """Raise if a targeted cell has fewer than two rows to interpolate between."""
    for c, t in targets.items():
        if t and getattr(cells, c) < 2:
            raise InsufficientSupportError(
                f"cell {c} has {getattr(cells, c)} row(s); SMOTE needs at least 2 to interpolate")


def make_plan(train: Dataset, strategy, k_neighbors: int = 5, seed: int = 0) -> OversamplePlan:
    strategy = Strategy.parse(strategy)
    return OversamplePlan(strategy, target_counts(cell_counts(train), strategy), k_neighbors, seed)


class Neighbors(NamedTuple):
    indices: np.ndarray
    reduced: bool


def nearest_neighbors(points, query_index: int, k: int) -> Neighbors:
    """k nearest rows to ``points[query_index]`` by Euclidean distance.

    The query row itself is excluded; ties go to the lower index. When fewer
    than k other rows exist all of them are returned and ``reduced`` is set.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    P = np.atleast_2d(np.asarray(points, dtype=float))
    d2 = np.sum((P - P[query_index]) ** 2, axis=1)
    d2[query_index] = np.inf
    order = np.argsort(d2, kind="stable")[:len(P) - 1]
    reduced = len(order) < k
    return Neighbors(order[:k], reduced)


def _neighbor_table(P: np.ndarray, queries: np.ndarray, k: int) -> np.ndarray:
    """Exact k-NN rows for many queries, same ordering as nearest_neighbors.

    Squared distances come from the Gram expansion in chunks; candidates
    within a rounding margin of the k-th value are then re-scored exactly so
    ties and near-ties resolve identically to the brute-force routine.
    """
    m = len(P)
    sq = np.einsum("ij,ij->i", P, P)
    scale = float(sq.max()) if m else 0.0
    out = np.empty((len(queries), k), dtype=int)
    chunk = max(1, int(2_000_000 // max(m, 1)))
    for start in range(0, len(queries), chunk):
        q = queries[start:start + chunk]
        approx = sq[q][:, None] + sq[None, :] - 2.0 * P[q] @ P.T
        approx[np.arange(len(q)), q] = np.inf
        kth = np.partition(approx, k - 1, axis=1)[:, k - 1]
        slack = 1e-9 * (scale + 1.0)
        for r, qi in enumerate(q):
            cand = np.flatnonzero(approx[r] <= kth[r] + slack)
            exact = np.sum((P[cand] - P[qi]) ** 2, axis=1)
            order = np.lexsort((cand, exact))
            out[start + r] = cand[order[:k]]
    return out


def smote_sample(x, x_nn, u: float, blocks=()) -> np.ndarray:
    """Interpolate a synthetic row between ``x`` and its neighbor ``x_nn``.

    Numeric coordinates move a fraction ``u`` of the way to ``x_nn``. Each
    one-hot block in ``blocks`` (``(start, stop)`` column ranges) is copied
    whole from ``x`` when ``u < 0.5`` and from ``x_nn`` otherwise.
    """
    x = np.asarray(x, dtype=float)
    x_nn = np.asarray(x_nn, dtype=float)
    if x.shape != x_nn.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {x_nn.shape}")
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"u must lie in [0, 1], got {u}")
    return _interpolate(x[None, :], x_nn[None, :], np.array([u]), blocks)[0]


def _interpolate(A, B, u, blocks):
    if blocks:
        numeric = np.ones(A.shape[1], dtype=bool)
        for a, b in blocks:
            numeric[a:b] = False
    out = A + u[:, None] * (B - A)
    out = np.clip(out, np.minimum(A, B), np.maximum(A, B))
    out[u == 1.0] = B[u == 1.0]
    if blocks:
        take_b = u >= 0.5
        cat = ~numeric
        out[:, cat] = np.where(take_b[:, None], B[:, cat], A[:, cat])
    return out


def _cell_rng(seed: int, cell: str) -> np.random.Generator:
    # independent stream per cell so generation order across cells is irrelevant
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, CELLS.index(cell)])


def synthesize_cell(X: np.ndarray, count: int, k: int, seed: int, cell: str, blocks=()) -> np.ndarray:
    """Generate ``count`` SMOTE rows from the member rows ``X`` of one cell."""
    m = len(X)
    if count == 0:
        return np.empty((0, X.shape[1]))
    if m < 2:
        raise InsufficientSupportError(f"cell {cell} has {m} row(s); SMOTE needs at least 2")
    k_eff = min(k, m - 1)
    rng = _cell_rng(seed, cell)
    donors = rng.integers(0, m, size=count)
    picks = rng.integers(0, k_eff, size=count)
    u = rng.random(count)
    uniq, inverse = np.unique(donors, return_inverse=True)
    table = _neighbor_table(X, uniq, k_eff)
    partners = table[inverse, picks]
    return _interpolate(X[donors], X[partners], u, blocks)


def apply_plan(train: Dataset, plan: OversamplePlan) -> Dataset:
    """Append the plan's synthetic rows (weight 1) after the original rows."""
    check_support(cell_counts(train), plan.targets)
    out = train
    for cell in CELLS:
        count = plan.targets.get(cell, 0)
        if not count:
            continue
        members = train.X[train.cell_mask(cell)]
        new = synthesize_cell(members, count, plan.k_neighbors, plan.seed, cell, train.blocks)
        gv, yv = CELL_KEYS[cell]
        out = out.append(new, np.full(count, yv), np.full(count, gv))
    return out


def oversample(train: Dataset, strategy, k_neighbors: int = 5, seed: int = 0) -> tuple[Dataset, OversamplePlan]:
    plan = make_plan(train, strategy, k_neighbors, seed)
    return apply_plan(train, plan), plan
