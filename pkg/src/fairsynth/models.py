"""Probabilistic classifiers trained from scratch with instance weights.

Both models expose ``score(X) -> probabilities in [0, 1]`` and serialize to
plain dicts for the CLI's train/eval separation.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import TrainingDivergenceError
from .tabular import Dataset


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True)
class LogRegParams:
    learning_rate: float = 0.1
    l2: float = 1e-4
    max_iters: int = 2000
    tol: float = 1e-6

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.l2 < 0:
            raise ValueError("l2 must be nonnegative")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int = 8
    min_leaf: int = 5
    features_per_split: int | str = "sqrt"
    seed: int = 0

    def __post_init__(self):
        for name in ("n_trees", "max_depth", "min_leaf"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        fps = self.features_per_split
        if fps != "sqrt" and (not isinstance(fps, int) or fps < 1):
            raise ValueError("features_per_split must be a positive int or 'sqrt'")

    def mtry(self, d: int) -> int:
        if self.features_per_split == "sqrt":
            return max(1, math.ceil(math.sqrt(d)))
        return min(d, int(self.features_per_split))


def logistic_loss(beta, b, X, y, w, l2):
    """Weighted mean negative log-likelihood plus ``l2/2 * ||beta||^2``."""
    z = X @ beta + b
    nll = np.logaddexp(0.0, z) - y * z
    return float(np.dot(w, nll) / w.sum() + 0.5 * l2 * np.dot(beta, beta))


def logistic_gradient(beta, b, X, y, w, l2):
    z = X @ beta + b
    r = w * (sigmoid(z) - y) / w.sum()
    return X.T @ r + l2 * beta, float(r.sum())


@dataclass(frozen=True)
class LogisticModel:
    coef: np.ndarray
    intercept: float
    params: LogRegParams = field(default_factory=LogRegParams)
    n_iter: int = 0
    grad_norm: float = 0.0
    converged: bool = True

    kind = "logreg"

    def score(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return sigmoid(X @ self.coef + self.intercept)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "coef": [float(c) for c in self.coef],
                "intercept": float(self.intercept), "params": asdict(self.params),
                "n_iter": self.n_iter, "grad_norm": self.grad_norm,
                "converged": self.converged}

    @classmethod
    def from_dict(cls, doc):
        return cls(np.asarray(doc["coef"], dtype=float), float(doc["intercept"]),
                   LogRegParams(**doc["params"]), int(doc["n_iter"]),
                   float(doc["grad_norm"]), bool(doc["converged"]))


def train_logreg(train: Dataset, params: LogRegParams | None = None) -> LogisticModel:
    """Full-batch gradient descent from zero weights.

    Stops once the gradient norm (including the intercept component) drops
    to ``tol``; otherwise runs ``max_iters`` steps and reports
    ``converged=False``.
    """
    params = params or LogRegParams()
    if train.n < 2:
        raise ValueError("logistic regression needs at least two rows")
    X, y, w = train.X, train.y.astype(float), train.w
    if w.sum() <= 0:
        raise ValueError("total training weight is zero")
    beta = np.zeros(train.d)
    b = 0.0
    lr = params.learning_rate
    gnorm = math.inf
    it = 0
    for it in range(1, params.max_iters + 1):
        gb, g0 = logistic_gradient(beta, b, X, y, w, params.l2)
        gnorm = math.sqrt(float(gb @ gb) + g0 * g0)
        if not math.isfinite(gnorm):
            raise TrainingDivergenceError("non-finite gradient", it)
        if gnorm <= params.tol:
            return LogisticModel(beta, b, params, it - 1, gnorm, True)
        beta = beta - lr * gb
        b = b - lr * g0
        if not math.isfinite(logistic_loss(beta, b, X, y, w, params.l2)):
            raise TrainingDivergenceError("non-finite loss", it)
    gb, g0 = logistic_gradient(beta, b, X, y, w, params.l2)
    gnorm = math.sqrt(float(gb @ gb) + g0 * g0)
    return LogisticModel(beta, b, params, it, gnorm, gnorm <= params.tol)


# -- random forest ---------------------------------------------------------


@dataclass(frozen=True)
class Tree:
    """Flat array tree; ``feature == -1`` marks a leaf holding a 0/1 vote."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    vote: np.ndarray

    def apply(self, X) -> np.ndarray:
        node = np.zeros(len(X), dtype=int)
        active = self.feature[node] >= 0
        while active.any():
            rows = np.flatnonzero(active)
            nd = node[rows]
            go_left = X[rows, self.feature[nd]] <= self.threshold[nd]
            node[rows] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return self.vote[node]

    def to_dict(self):
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "vote": self.vote.tolist()}

    @classmethod
    def from_dict(cls, doc):
        return cls(np.asarray(doc["feature"], dtype=int), np.asarray(doc["threshold"], dtype=float),
                   np.asarray(doc["left"], dtype=int), np.asarray(doc["right"], dtype=int),
                   np.asarray(doc["vote"], dtype=int))


def _best_split(xcol, ycol, min_leaf):
    """Lowest summed Gini impurity split of one feature column.

    Returns (impurity, threshold) or None when no split leaves at least
    ``min_leaf`` rows on both sides.
    """
    n = len(xcol)
    order = np.argsort(xcol, kind="stable")
    xs = xcol[order]
    pos = np.cumsum(ycol[order])
    total = pos[-1]
    nl = np.arange(1, n)
    pl = pos[:-1]
    valid = (nl >= min_leaf) & (n - nl >= min_leaf) & (xs[:-1] < xs[1:])
    if not valid.any():
        return None
    nr = n - nl
    pr = total - pl
    # n_left * gini_left + n_right * gini_right, with gini = 2 p (1 - p)
    imp = 2.0 * (pl * (nl - pl) / nl + pr * (nr - pr) / nr)
    imp = np.where(valid, imp, np.inf)
    i = int(np.argmin(imp))
    lo, hi = xs[i], xs[i + 1]
    thr = lo + (hi - lo) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return float(imp[i]), float(thr)


def _grow_tree(X, y, rng, max_depth, min_leaf, mtry) -> Tree:
    feature, threshold, left, right, vote = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        pos = int(y[idx].sum())
        vote.append(1 if 2 * pos >= len(idx) else 0)
        return len(feature) - 1

    root = new_node(np.arange(len(y)))
    stack = [(root, np.arange(len(y)), 0)]
    d = X.shape[1]
    while stack:
        node, idx, depth = stack.pop()
        npos = int(y[idx].sum())
        if depth >= max_depth or len(idx) < 2 * min_leaf or npos in (0, len(idx)):
            continue
        best = None
        for f in rng.choice(d, size=mtry, replace=False):
            found = _best_split(X[idx, f], y[idx], min_leaf)
            if found is not None and (best is None or found[0] < best[0]):
                best = (found[0], int(f), found[1])
        if best is None:
            continue
        _, f, thr = best
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node], threshold[node] = f, thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))
    return Tree(np.array(feature, dtype=int), np.array(threshold, dtype=float),
                np.array(left, dtype=int), np.array(right, dtype=int),
                np.array(vote, dtype=int))


@dataclass(frozen=True)
class ForestModel:
    trees: tuple
    params: ForestParams = field(default_factory=ForestParams)

    kind = "forest"

    def score(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        votes = np.zeros(len(X))
        for t in self.trees:
            votes += t.apply(X)
        return votes / len(self.trees)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": asdict(self.params),
                "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, doc):
        return cls(tuple(Tree.from_dict(t) for t in doc["trees"]), ForestParams(**doc["params"]))


def train_forest(train: Dataset, params: ForestParams | None = None) -> ForestModel:
    """Bagged Gini trees; bootstrap rows are drawn with probability ~ weight.

    Each tree gets its own child seed, so trees could be grown in any order
    or in parallel without changing the result.
    """
    params = params or ForestParams()
    if train.n < 2:
        raise ValueError("random forest needs at least two rows")
    p = train.w / train.w.sum()
    mtry = params.mtry(train.d)
    y = train.y.astype(int)
    trees = []
    for child in np.random.SeedSequence(params.seed).spawn(params.n_trees):
        rng = np.random.default_rng(child)
        boot = rng.choice(train.n, size=train.n, replace=True, p=p)
        trees.append(_grow_tree(train.X[boot], y[boot], rng, params.max_depth,
                                params.min_leaf, mtry))
    return ForestModel(tuple(trees), params)


def train_model(train: Dataset, kind: str = "logreg", params=None):
    if kind == "logreg":
        return train_logreg(train, params)
    if kind == "forest":
        return train_forest(train, params)
    raise ValueError(f"unknown classifier {kind!r}")


def model_from_dict(doc: dict):
    kind = doc.get("kind")
    if kind == "logreg":
        return LogisticModel.from_dict(doc)
    if kind == "forest":
        return ForestModel.from_dict(doc)
    raise ValueError(f"unknown model kind {kind!r}")


def predict(model, X, threshold: float = 0.5) -> np.ndarray:
    """Label 1 exactly when the score is >= threshold."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    return (model.score(X) >= threshold).astype(np.int8)
