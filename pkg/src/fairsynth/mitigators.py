"""Baseline mitigators: Reweighing (pre-processing) and Reject Option
classification (post-processing)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UndefinedWeightError
from .tabular import CELL_KEYS, CELLS, Dataset


def reweigh(train: Dataset) -> Dataset:
    """Replace weights with P(g) P(y) / P(g, y) from empirical frequencies.

    After reweighing the weighted cell masses factorize, so group and label
    are independent under the weighted distribution.
    """
    n = train.n
    w = np.empty(n)
    for cell in CELLS:
        gv, yv = CELL_KEYS[cell]
        mask = train.cell_mask(cell)
        n_cell = int(mask.sum())
        if n_cell == 0:
            raise UndefinedWeightError(f"cell {cell} is empty; reweighing is undefined")
        n_g = int(np.sum(train.g == gv))
        n_y = int(np.sum(train.y == yv))
        w[mask] = (n_g * n_y) / (n * n_cell)
    return train.with_weights(w)


@dataclass(frozen=True)
class RejectOptionParams:
    margin: float = 0.1
    base_threshold: float = 0.5

    def __post_init__(self):
        if not 0 < self.margin <= 0.5:
            raise ValueError("margin must lie in (0, 0.5]")
        if not 0 <= self.base_threshold <= 1:
            raise ValueError("base_threshold must lie in [0, 1]")

    @property
    def band(self) -> tuple[float, float]:
        return (max(0.0, self.base_threshold - self.margin),
                min(1.0, self.base_threshold + self.margin))


def reject_option(scores, g, params: RejectOptionParams) -> np.ndarray:
    """Threshold the scores, then inside the closed critical band give the
    unprivileged rows the favorable label and the privileged rows the
    unfavorable one."""
    s = np.asarray(scores, dtype=float)
    g = np.asarray(g)
    if s.shape != g.shape:
        raise ValueError("scores and g must have the same length")
    if np.any((s < 0) | (s > 1)):
        raise ValueError("scores must lie in [0, 1]")
    lo, hi = params.band
    labels = (s >= params.base_threshold).astype(np.int8)
    band = (s >= lo) & (s <= hi)
    labels[band & (g == 0)] = 1
    labels[band & (g == 1)] = 0
    return labels
