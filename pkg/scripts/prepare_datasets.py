#!/usr/bin/env python3
"""Convert the raw UCI Adult and ProPublica COMPAS files into clean CSVs.

    python scripts/prepare_datasets.py --adult-dir RAW --compas-csv RAW.csv --out DIR

Adult: adult.data + adult.test are concatenated, rows with "?" dropped and
the trailing "." stripped from test labels. COMPAS: the usual ProPublica
screening filters are applied and race is reduced to Caucasian / Not
Caucasian. Schemas live in fairsynth/data/{adult,adult_reduced,compas}.yaml.
"""

import argparse
import csv
from pathlib import Path

ADULT_COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education-num", "marital-status",
    "occupation", "relationship", "race", "sex", "capital-gain", "capital-loss",
    "hours-per-week", "native-country", "income",
]
COMPAS_KEEP = [
    "sex", "age", "age_cat", "juv_fel_count", "juv_misd_count", "juv_other_count",
    "priors_count", "c_charge_degree", "race", "two_year_recid",
]


def prepare_adult(raw_dir: Path, out: Path) -> int:
    rows = []
    for name in ("adult.data", "adult.test"):
        with open(raw_dir / name, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip() or line.startswith("|"):
                    continue
                rec = [c.strip() for c in line.split(",")]
                if len(rec) != len(ADULT_COLUMNS) or "?" in rec:
                    continue
                rec[-1] = rec[-1].rstrip(".")
                rows.append(rec)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ADULT_COLUMNS)
        w.writerows(rows)
    return len(rows)


def prepare_adult_reduced(adult_csv: Path, out: Path) -> int:
    """Reduced Adult: age decade, binned education years, race, sex, income.

    Age >= 70 collapses to one bin, education years below 6 and above 12 are
    pooled, race is White / Non-white.
    """
    with open(adult_csv, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    with open(out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["age_decade", "education_years", "race", "sex", "income"])
        for r in rows:
            decade = int(r["age"]) // 10 * 10
            edu = int(r["education-num"])
            w.writerow([
                ">=70" if decade >= 70 else str(decade),
                "<6" if edu <= 5 else (">12" if edu >= 13 else str(edu)),
                "White" if r["race"] == "White" else "Non-white",
                r["sex"],
                r["income"],
            ])
    return len(rows)


def prepare_compas(raw_csv: Path, out: Path) -> int:
    with open(raw_csv, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        # the raw file repeats some column names; keep the first occurrence
        pos = {}
        for j, h in enumerate(header):
            pos.setdefault(h, j)
        rows = []
        for rec in reader:
            get = lambda k: rec[pos[k]]
            days = get("days_b_screening_arrest")
            if days == "" or not -30 <= int(float(days)) <= 30:
                continue
            if get("is_recid") == "-1" or get("c_charge_degree") == "O" or get("score_text") == "N/A":
                continue
            row = [get(k) for k in COMPAS_KEEP]
            row[COMPAS_KEEP.index("race")] = "Caucasian" if get("race") == "Caucasian" else "Not Caucasian"
            if any(c == "" for c in row):
                continue
            rows.append(row)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COMPAS_KEEP)
        w.writerows(rows)
    return len(rows)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--adult-dir", type=Path)
    ap.add_argument("--compas-csv", type=Path)
    ap.add_argument("--out", type=Path, default=Path("."))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    if args.adult_dir:
        print("adult rows:", prepare_adult(args.adult_dir, args.out / "adult.csv"))
        print("reduced adult rows:", prepare_adult_reduced(args.out / "adult.csv",
                                                           args.out / "adult_reduced.csv"))
    if args.compas_csv:
        print("compas rows:", prepare_compas(args.compas_csv, args.out / "compas.csv"))


if __name__ == "__main__":
    main()
