"""Synthetic tabular data with a group-dependent base-rate gap.

The protected attribute is not a feature, but ``zone`` and ``income`` are
correlated with it, so a classifier trained on the raw data reproduces the
historical gap through those proxies.
"""

from __future__ import annotations

import csv
from importlib import resources
from pathlib import Path

import numpy as np

BIASED_COLUMNS = ("skill", "experience", "income", "zone", "group", "outcome")
BIASED_SCHEMA = """\
columns:
  - {name: skill, kind: numeric}
  - {name: experience, kind: numeric}
  - {name: income, kind: numeric}
  - {name: zone, kind: categorical}
  - {name: group, kind: categorical}
  - {name: outcome, kind: categorical}
label_column: outcome
favorable_value: approved
protected_column: group
privileged_value: a
"""

_ZONES = ("north", "east", "south", "west")


def make_biased_rows(n: int = 2000, seed: int = 7, privileged_share: float = 0.65,
                     penalty: float = 1.4) -> list[tuple]:
    """Rows of (skill, experience, income, zone, group, outcome).

    ``penalty`` is subtracted from the unprivileged group's approval logit,
    on top of the proxy features, to create the base-rate gap.
    """
    rng = np.random.default_rng(seed)
    priv = rng.random(n) < privileged_share
    skill = rng.normal(0.0, 1.0, n)
    experience = np.clip(rng.normal(8.0, 4.0, n) + 1.5 * priv, 0, None)
    income = rng.normal(50.0, 12.0, n) + 10.0 * priv
    zone_p = np.where(priv[:, None], [0.45, 0.35, 0.1, 0.1], [0.1, 0.1, 0.4, 0.4])
    zone = np.array([rng.choice(4, p=p) for p in zone_p])
    logit = (1.3 * skill + 0.12 * (experience - 8.0) + 0.03 * (income - 55.0)
             - penalty * (~priv) - 0.3)
    approved = rng.random(n) < 1.0 / (1.0 + np.exp(-logit))
    rows = []
    for i in range(n):
        rows.append((f"{skill[i]:.3f}", f"{experience[i]:.1f}", f"{income[i]:.1f}",
                     _ZONES[zone[i]], "a" if priv[i] else "b",
                     "approved" if approved[i] else "denied"))
    return rows


def write_biased_fixture(directory, n: int = 2000, seed: int = 7) -> tuple[Path, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    data = directory / "biased.csv"
    with open(data, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BIASED_COLUMNS)
        w.writerows(make_biased_rows(n, seed))
    schema = directory / "biased.yaml"
    schema.write_text(BIASED_SCHEMA, encoding="utf-8")
    return data, schema


def bundled(name: str) -> Path:
    """Path of a data file shipped inside the package (``fairsynth/data``)."""
    return Path(str(resources.files("fairsynth") / "data" / name))
