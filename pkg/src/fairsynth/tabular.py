"""Dataset schema, CSV ingestion, encoding, splitting and cell accounting.

Raw CSV rows are kept as strings in a :class:`RawTable`. An :class:`Encoder`
is fitted on a RawTable (category vocabularies, min/max per numeric column,
raw label/group values) and turns any RawTable with the same schema into an
encoded :class:`Dataset`. Fitting on training rows only and transforming
test rows with the same encoder keeps scaling leak-free.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from .errors import CardinalityError, EmptyInputError, IngestError, SchemaError

NUMERIC = "numeric"
CATEGORICAL = "categorical"

# cell order used everywhere: (group, label)
CELLS = ("PF", "PU", "UF", "UU")
CELL_KEYS = {"PF": (1, 1), "PU": (1, 0), "UF": (0, 1), "UU": (0, 0)}


@dataclass(frozen=True)
class Schema:
    columns: tuple[tuple[str, str], ...]
    label_column: str
    favorable_value: str
    protected_column: str
    privileged_value: str
    # append a 0/1 privileged indicator as the last feature column
    protected_as_feature: bool = False

    def __post_init__(self):
        names = [name for name, _ in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names in schema")
        for name, kind in self.columns:
            if kind not in (NUMERIC, CATEGORICAL):
                raise SchemaError(f"column {name!r}: unknown kind {kind!r}")
        for role, name in (("label_column", self.label_column),
                           ("protected_column", self.protected_column)):
            if name not in names:
                raise SchemaError(f"{role} {name!r} is not among the schema columns")
        if self.label_column == self.protected_column:
            raise SchemaError("label_column and protected_column must differ")

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.columns]

    @property
    def feature_columns(self) -> list[tuple[str, str]]:
        skip = (self.label_column, self.protected_column)
        return [(n, k) for n, k in self.columns if n not in skip]

    @classmethod
    def from_dict(cls, doc: dict) -> "Schema":
        try:
            raw_cols = doc["columns"]
            cols = []
            for entry in raw_cols:
                if isinstance(entry, dict):
                    cols.append((str(entry["name"]), str(entry.get("kind", NUMERIC))))
                else:
                    name, kind = entry
                    cols.append((str(name), str(kind)))
            return cls(
                columns=tuple(cols),
                label_column=str(doc["label_column"]),
                favorable_value=str(doc["favorable_value"]),
                protected_column=str(doc["protected_column"]),
                privileged_value=str(doc["privileged_value"]),
                protected_as_feature=_flag(doc.get("protected_as_feature", False)),
            )
        except KeyError as exc:
            raise SchemaError(f"schema is missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"malformed schema: {exc}") from None

    def to_dict(self) -> dict:
        return {
            "columns": [{"name": n, "kind": k} for n, k in self.columns],
            "label_column": self.label_column,
            "favorable_value": self.favorable_value,
            "protected_column": self.protected_column,
            "privileged_value": self.privileged_value,
            "protected_as_feature": self.protected_as_feature,
        }


def _flag(v) -> bool:
    if isinstance(v, bool):
        return v
    if str(v).strip().lower() in ("true", "yes", "1", "on"):
        return True
    if str(v).strip().lower() in ("false", "no", "0", "off"):
        return False
    raise SchemaError(f"expected a boolean, got {v!r}")


def load_schema(path) -> Schema:
    """Read a YAML schema document.

    All scalars are read as strings so label values such as ``no`` or ``1``
    are not coerced into booleans or ints.
    """
    with open(path, encoding="utf-8") as fh:
        doc = yaml.load(fh, Loader=yaml.BaseLoader)
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: schema must be a mapping")
    return Schema.from_dict(doc)


@dataclass(frozen=True)
class RawTable:
    """Unencoded rows restricted to the schema's columns, in schema order."""

    schema: Schema
    rows: tuple[tuple[str, ...], ...]
    line_numbers: tuple[int, ...]

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> list[str]:
        j = self.schema.names.index(name)
        return [r[j] for r in self.rows]

    def subset(self, idx) -> "RawTable":
        idx = [int(i) for i in idx]
        return RawTable(self.schema, tuple(self.rows[i] for i in idx),
                        tuple(self.line_numbers[i] for i in idx))

    def concat(self, other: "RawTable") -> "RawTable":
        if other.schema != self.schema:
            raise SchemaError("cannot concatenate tables with different schemas")
        return RawTable(self.schema, self.rows + other.rows,
                        self.line_numbers + other.line_numbers)

    def labels_and_groups(self):
        """Map raw label/protected values to 0/1 arrays."""
        enc = _fit_targets(self)
        return enc.map_labels(self), enc.map_groups(self)


def read_csv(path, schema: Schema) -> RawTable:
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyInputError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        pos = {}
        for name in schema.names:
            if name not in header:
                raise SchemaError(f"column {name!r} not found in {path.name} header")
            pos[name] = header.index(name)
        take = [pos[n] for n in schema.names]
        kinds = dict(schema.columns)
        rows, lines = [], []
        for rec in reader:
            if not rec or all(not c.strip() for c in rec):
                continue
            line = reader.line_num
            if len(rec) != len(header):
                raise IngestError(f"expected {len(header)} fields, got {len(rec)}", line)
            row = tuple(rec[j].strip() for j in take)
            for name, cell in zip(schema.names, row):
                if cell == "":
                    raise IngestError(f"missing value in column {name!r}", line)
                if kinds[name] == NUMERIC and name not in (schema.label_column, schema.protected_column):
                    try:
                        v = float(cell)
                    except ValueError:
                        raise IngestError(f"column {name!r}: cannot parse {cell!r} as a number", line) from None
                    if not math.isfinite(v):
                        raise IngestError(f"column {name!r}: non-finite value {cell!r}", line)
            rows.append(row)
            lines.append(line)
    if not rows:
        raise EmptyInputError(f"{path}: no data rows")
    return RawTable(schema, tuple(rows), tuple(lines))


@dataclass(frozen=True)
class _Targets:
    schema: Schema
    label_values: tuple[str, str]   # (unfavorable, favorable)
    group_values: tuple[str, str]   # (unprivileged, privileged)

    def map_labels(self, raw: RawTable) -> np.ndarray:
        return self._map(raw.column(self.schema.label_column), self.label_values, "label", raw)

    def map_groups(self, raw: RawTable) -> np.ndarray:
        return self._map(raw.column(self.schema.protected_column), self.group_values, "protected", raw)

    @staticmethod
    def _map(values, known, what, raw):
        out = np.empty(len(values), dtype=np.int8)
        for i, v in enumerate(values):
            if v == known[1]:
                out[i] = 1
            elif v == known[0]:
                out[i] = 0
            else:
                raise CardinalityError(
                    f"line {raw.line_numbers[i]}: unexpected {what} value {v!r} "
                    f"(known: {known[0]!r}, {known[1]!r})")
        return out


def _two_values(values, wanted, what):
    seen = list(dict.fromkeys(values))
    if wanted not in seen:
        raise CardinalityError(f"{what} value {wanted!r} does not occur in the data")
    if len(seen) != 2:
        raise CardinalityError(
            f"{what} column must have exactly two distinct values, found {len(seen)}: {seen[:5]}")
    other = seen[0] if seen[1] == wanted else seen[1]
    return other, wanted


def _fit_targets(raw: RawTable) -> _Targets:
    s = raw.schema
    return _Targets(
        s,
        _two_values(raw.column(s.label_column), s.favorable_value, "label"),
        _two_values(raw.column(s.protected_column), s.privileged_value, "protected"),
    )


@dataclass(frozen=True)
class Encoder:
    """Fitted feature encoding for one schema.

    Numeric columns are min-max scaled with the fitted range (a constant
    column maps to 0). Categorical columns become one-hot blocks in
    first-appearance order; unseen categories encode as an all-zero block.
    """

    schema: Schema
    numeric_ranges: dict = field(default_factory=dict)   # name -> (lo, hi)
    categories: dict = field(default_factory=dict)       # name -> tuple of values
    label_values: tuple = ()
    group_values: tuple = ()

    @classmethod
    def fit(cls, raw: RawTable) -> "Encoder":
        targets = _fit_targets(raw)
        ranges, cats = {}, {}
        for name, kind in raw.schema.feature_columns:
            col = raw.column(name)
            if kind == NUMERIC:
                vals = np.array([float(v) for v in col])
                ranges[name] = (float(vals.min()), float(vals.max()))
            else:
                cats[name] = tuple(dict.fromkeys(col))
        return cls(raw.schema, ranges, cats, targets.label_values, targets.group_values)

    @property
    def feature_names(self) -> list[str]:
        names = []
        for name, kind in self.schema.feature_columns:
            if kind == NUMERIC:
                names.append(name)
            else:
                names.extend(f"{name}={c}" for c in self.categories[name])
        if self.schema.protected_as_feature:
            names.append(self.schema.protected_column)
        return names

    @property
    def protected_index(self) -> int | None:
        return len(self.feature_names) - 1 if self.schema.protected_as_feature else None

    @property
    def blocks(self) -> tuple[tuple[int, int], ...]:
        out, j = [], 0
        for name, kind in self.schema.feature_columns:
            if kind == NUMERIC:
                j += 1
            else:
                width = len(self.categories[name])
                out.append((j, j + width))
                j += width
        return tuple(out)

    def transform(self, raw: RawTable) -> "Dataset":
        if raw.schema != self.schema:
            raise SchemaError("table schema does not match the encoder schema")
        targets = _Targets(self.schema, self.label_values, self.group_values)
        y = targets.map_labels(raw)
        g = targets.map_groups(raw)
        parts = []
        for name, kind in self.schema.feature_columns:
            col = raw.column(name)
            if kind == NUMERIC:
                lo, hi = self.numeric_ranges[name]
                vals = np.array([float(v) for v in col])
                span = hi - lo
                parts.append(((vals - lo) / span if span > 0 else np.zeros_like(vals))[:, None])
            else:
                cats = self.categories[name]
                index = {c: k for k, c in enumerate(cats)}
                block = np.zeros((len(col), len(cats)))
                for i, v in enumerate(col):
                    k = index.get(v)
                    if k is not None:
                        block[i, k] = 1.0
                parts.append(block)
        if self.schema.protected_as_feature:
            parts.append(g[:, None].astype(float))
        X = np.hstack(parts) if parts else np.zeros((len(raw), 0))
        return Dataset(X, y, g, np.ones(len(raw)), tuple(self.feature_names), self.blocks,
                       self.protected_index)

    def inverse_transform(self, X: np.ndarray) -> list[list[str]]:
        """De-encode feature rows back to raw feature-column strings.

        Numeric values are un-scaled; each one-hot block maps to the category
        with the largest entry. Returned rows follow ``schema.feature_columns``.
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        cols, j = [], 0
        for name, kind in self.schema.feature_columns:
            if kind == NUMERIC:
                lo, hi = self.numeric_ranges[name]
                cols.append([_fmt(lo + v * (hi - lo)) for v in X[:, j]])
                j += 1
            else:
                cats = self.categories[name]
                block = X[:, j:j + len(cats)]
                cols.append([cats[int(np.argmax(r))] for r in block])
                j += len(cats)
        return [list(r) for r in zip(*cols)] if cols else [[] for _ in range(len(X))]

    def to_dict(self) -> dict:
        return {
            "schema": self.schema.to_dict(),
            "numeric_ranges": {k: list(v) for k, v in self.numeric_ranges.items()},
            "categories": {k: list(v) for k, v in self.categories.items()},
            "label_values": list(self.label_values),
            "group_values": list(self.group_values),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Encoder":
        return cls(
            Schema.from_dict(doc["schema"]),
            {k: tuple(v) for k, v in doc["numeric_ranges"].items()},
            {k: tuple(v) for k, v in doc["categories"].items()},
            tuple(doc["label_values"]),
            tuple(doc["group_values"]),
        )


def _fmt(v: float) -> str:
    # shortest repr that round-trips; integral values print without ".0"
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Encoded features X, favorable labels y, privileged flags g, weights w."""

    X: np.ndarray
    y: np.ndarray
    g: np.ndarray
    w: np.ndarray
    feature_names: tuple[str, ...] = ()
    blocks: tuple[tuple[int, int], ...] = ()
    protected_index: int | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        n = X.shape[0]
        if n < 1:
            raise ValueError("a dataset needs at least one row")
        y = np.asarray(self.y)
        g = np.asarray(self.g)
        w = np.ones(n) if self.w is None else np.asarray(self.w, dtype=float)
        if y.shape != (n,) or g.shape != (n,) or w.shape != (n,):
            raise ValueError("X, y, g and w must agree on the number of rows")
        if not np.all(np.isfinite(X)):
            raise ValueError("feature matrix contains non-finite values")
        if not (np.isin(y, (0, 1)).all() and np.isin(g, (0, 1)).all()):
            raise ValueError("y and g must be binary 0/1")
        if not (np.all(np.isfinite(w)) and np.all(w >= 0)):
            raise ValueError("weights must be finite and nonnegative")
        names = tuple(self.feature_names) or tuple(f"x{j}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise ValueError("feature_names length does not match X columns")
        for a, b in self.blocks:
            if not 0 <= a < b <= X.shape[1]:
                raise ValueError(f"one-hot block ({a}, {b}) outside feature range")
        object.__setattr__(self, "X", _frozen(X, float))
        object.__setattr__(self, "y", _frozen(y, np.int8))
        object.__setattr__(self, "g", _frozen(g, np.int8))
        object.__setattr__(self, "w", _frozen(w, float))
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "blocks", tuple((int(a), int(b)) for a, b in self.blocks))
        if self.protected_index is not None and not 0 <= self.protected_index < X.shape[1]:
            raise ValueError("protected_index outside feature range")

    @property
    def situational_X(self) -> np.ndarray:
        """Features without the protected indicator column, if present."""
        if self.protected_index is None:
            return self.X
        return np.delete(self.X, self.protected_index, axis=1)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.X[idx], self.y[idx], self.g[idx], self.w[idx],
                       self.feature_names, self.blocks, self.protected_index)

    def with_weights(self, w) -> "Dataset":
        return Dataset(self.X, self.y, self.g, w, self.feature_names, self.blocks,
                       self.protected_index)

    def append(self, X, y, g, w=None) -> "Dataset":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if len(X) == 0:
            return self
        w = np.ones(len(X)) if w is None else w
        return Dataset(np.vstack([self.X, X]), np.concatenate([self.y, np.asarray(y, dtype=np.int8)]),
                       np.concatenate([self.g, np.asarray(g, dtype=np.int8)]),
                       np.concatenate([self.w, w]), self.feature_names, self.blocks,
                       self.protected_index)

    def cell_mask(self, cell: str) -> np.ndarray:
        gv, yv = CELL_KEYS[cell]
        return (self.g == gv) & (self.y == yv)


def load_csv(path, schema: Schema) -> Dataset:
    """Read, validate and encode a CSV, fitting the encoding on all its rows."""
    raw = read_csv(path, schema)
    return Encoder.fit(raw).transform(raw)


@dataclass(frozen=True)
class CellCounts:
    PF: int
    PU: int
    UF: int
    UU: int

    @property
    def n_p(self) -> int:
        return self.PF + self.PU

    @property
    def n_u(self) -> int:
        return self.UF + self.UU

    @property
    def n(self) -> int:
        return self.n_p + self.n_u

    @property
    def r_p(self) -> float | None:
        """Privileged positive base rate, None when the group is empty."""
        return self.PF / self.n_p if self.n_p else None

    @property
    def r_u(self) -> float | None:
        return self.UF / self.n_u if self.n_u else None

    @property
    def gap(self) -> float | None:
        if self.r_p is None or self.r_u is None:
            return None
        return self.r_p - self.r_u

    def __add__(self, other: "CellCounts") -> "CellCounts":
        return CellCounts(*(getattr(self, c) + getattr(other, c) for c in CELLS))

    def as_dict(self) -> dict:
        return {"PF": self.PF, "PU": self.PU, "UF": self.UF, "UU": self.UU,
                "r_p": self.r_p, "r_u": self.r_u, "gap": self.gap}


def cell_counts(ds: Dataset) -> CellCounts:
    return CellCounts(*(int(ds.cell_mask(c).sum()) for c in CELLS))


def _cell_ids(y, g) -> np.ndarray:
    # PF=0, PU=1, UF=2, UU=3
    y = np.asarray(y, dtype=int)
    g = np.asarray(g, dtype=int)
    return (1 - g) * 2 + (1 - y)


def split_indices(y: Sequence[int], g: Sequence[int], test_fraction: float,
                  seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded split stratified on the (group, label) cell.

    The test size is ``floor(n * test_fraction + 0.5)``. Per-cell test
    quotas use largest remainders, capped so a cell with two or more rows
    always keeps one in train.
    """
    cells = _cell_ids(y, g)
    n = len(cells)
    if not 0 < test_fraction < 1:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n_test = int(math.floor(n * test_fraction + 0.5))
    if n_test < 1 or n_test > n - 1:
        raise ValueError(f"test_fraction {test_fraction} with n={n} leaves an empty part")

    sizes = np.bincount(cells, minlength=4)
    caps = np.where(sizes >= 2, sizes - 1, sizes)
    if caps.sum() < n_test:
        raise ValueError("cannot place that many rows in test while keeping every cell in train")
    quota = sizes * test_fraction
    alloc = np.minimum(np.floor(quota).astype(int), caps)
    order = sorted(range(4), key=lambda c: (-(quota[c] - math.floor(quota[c])), c))
    remaining = n_test - alloc.sum()
    while remaining > 0:
        for c in order:
            if remaining and alloc[c] < caps[c]:
                alloc[c] += 1
                remaining -= 1
    rng = np.random.default_rng(seed)
    test = []
    for c in range(4):
        members = np.flatnonzero(cells == c)
        test.extend(rng.permutation(members)[:alloc[c]])
    test = np.sort(np.array(test, dtype=int))
    train = np.setdiff1d(np.arange(n), test)
    return train, test


def split(ds: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    if ds.n < 2:
        raise ValueError("need at least two rows to split")
    train, test = split_indices(ds.y, ds.g, test_fraction, seed)
    return ds.subset(train), ds.subset(test)
