#!/usr/bin/env python3
"""Fetch the three benchmark tables into datasets/ as canonical CSVs.

Sources:
  boston_housing.csv       CMU StatLib housing data (plain text)
  energy_efficiency.csv    UCI ENB2012 (xlsx -- needs pandas + openpyxl)
  concrete_compressive.csv UCI compressive strength (xls -- needs pandas + xlrd)

When the spreadsheet readers are not installed the raw workbook is saved
next to the target path and this script prints the manual conversion
steps instead of failing the whole fetch. After conversion, rerun this
script to validate shapes and (re)write datasets/manifest.txt.

Usage: python3 scripts/fetch_datasets.py [--dest datasets] [--only NAME]
"""

import argparse
import os
import sys
import urllib.request

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "src"))

from pcegp.bench import EXPECTED_DATASETS, dataset_manifest, manifest_text, verify_dataset

BOSTON_URL = "http://lib.stat.cmu.edu/datasets/boston"
ENERGY_URL = (
    "https://archive.ics.uci.edu/ml/machine-learning-databases/00242/"
    "ENB2012_data.xlsx"
)
CONCRETE_URL = (
    "https://archive.ics.uci.edu/ml/machine-learning-databases/concrete/"
    "compressive/Concrete_Data.xls"
)

BOSTON_COLUMNS = [
    "CRIM", "ZN", "INDUS", "CHAS", "NOX", "RM", "AGE", "DIS",
    "RAD", "TAX", "PTRATIO", "B", "LSTAT", "MEDV",
]
ENERGY_COLUMNS = ["X1", "X2", "X3", "X4", "X5", "X6", "X7", "X8", "Y1", "Y2"]
CONCRETE_COLUMNS = [
    "cement", "slag", "fly_ash", "water", "superplasticizer",
    "coarse_aggregate", "fine_aggregate", "age", "strength",
]


def _download(url: str) -> bytes:
    print(f"  downloading {url}")
    with urllib.request.urlopen(url, timeout=120) as resp:
        return resp.read()


def _write_csv(path: str, columns, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def fetch_boston(path: str) -> None:
    text = _download(BOSTON_URL).decode("utf-8")
    # 22 header lines, then each record wrapped across two physical lines
    # (11 values + 3 values); flattening the tokens recovers 506 x 14
    tokens = []
    for line in text.splitlines()[22:]:
        tokens.extend(line.split())
    values = np.asarray([float(t) for t in tokens])
    if values.size % 14 != 0:
        raise ValueError(f"unexpected token count {values.size} from {BOSTON_URL}")
    _write_csv(path, BOSTON_COLUMNS, values.reshape(-1, 14))


def _fetch_workbook(path: str, url: str, columns, engine: str) -> None:
    raw = _download(url)
    try:
        import pandas as pd

        table = pd.read_excel(__import__("io").BytesIO(raw), engine=engine)
    except ImportError as err:
        raw_path = path + "." + url.rsplit(".", 1)[-1]
        with open(raw_path, "wb") as fh:
            fh.write(raw)
        print(f"  spreadsheet reader unavailable ({err}).")
        print(f"  saved the raw workbook to {raw_path}; convert it by hand:")
        print(f"    1. open it in any spreadsheet program (or install the")
        print(f"       missing package and rerun this script)")
        print(f"    2. export the first sheet as CSV to {path}")
        print(f"    3. set the header row to: {','.join(columns)}")
        print(f"    4. rerun this script to validate")
        return
    table = table.dropna(axis=1, how="all").dropna(axis=0, how="all")
    if table.shape[1] != len(columns):
        raise ValueError(
            f"{url}: expected {len(columns)} columns, got {table.shape[1]}"
        )
    _write_csv(path, columns, table.to_numpy())


def fetch_energy(path: str) -> None:
    _fetch_workbook(path, ENERGY_URL, ENERGY_COLUMNS, engine="openpyxl")


def fetch_concrete(path: str) -> None:
    _fetch_workbook(path, CONCRETE_URL, CONCRETE_COLUMNS, engine="xlrd")


FETCHERS = {
    "boston_housing.csv": fetch_boston,
    "energy_efficiency.csv": fetch_energy,
    "concrete_compressive.csv": fetch_concrete,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--dest", default="datasets", help="output directory")
    parser.add_argument("--only", choices=sorted(FETCHERS), help="fetch one file")
    args = parser.parse_args(argv)

    os.makedirs(args.dest, exist_ok=True)
    names = [args.only] if args.only else sorted(FETCHERS)

    manifests = []
    failures = []
    for name in names:
        path = os.path.join(args.dest, name)
        print(f"{name}:")
        if os.path.exists(path):
            print("  already present, validating only")
        else:
            try:
                FETCHERS[name](path)
            except Exception as err:  # noqa: BLE001 - report and continue
                failures.append(f"{name}: {err}")
                print(f"  FAILED: {err}")
                continue
        if not os.path.exists(path):
            failures.append(f"{name}: needs manual conversion (see above)")
            continue
        try:
            manifests.append(verify_dataset(path, EXPECTED_DATASETS[name]))
            print(f"  ok: {dataset_manifest(path)['n_rows']} rows")
        except ValueError as err:
            failures.append(str(err))
            print(f"  INVALID: {err}")

    if manifests:
        manifest_path = os.path.join(args.dest, "manifest.txt")
        with open(manifest_path, "w", encoding="utf-8") as fh:
            fh.write(manifest_text(manifests))
        print(f"wrote {manifest_path}")

    if failures:
        print("incomplete:", *failures, sep="\n  ")
        return 1
    print("all datasets ready")
    return 0


if __name__ == "__main__":
    sys.exit(main())
