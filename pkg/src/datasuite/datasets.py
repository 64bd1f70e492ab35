"""Ordinal encoding of the UCI Adult census data."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .data import TabularDataset, from_array
from .errors import DataError

ADULT_COLUMNS = (
    "age", "workclass", "fnlwgt", "education", "education-num", "marital-status",
    "occupation", "relationship", "race", "sex", "capital-gain", "capital-loss",
    "hours-per-week", "native-country", "salary",
)
ADULT_FEATURES = (
    "age", "education-num", "marital-status", "relationship", "race", "sex",
    "capital-gain", "capital-loss", "hours-per-week", "country", "employment-type",
)
ADULT_LABEL = "salary"
ADULT_TRAIN_SIZE = 15378

_RELATIONSHIP = {
    "Husband": 3, "Wife": 3, "Not-in-family": 0, "Other-relative": 1, "Own-child": 2, "Unmarried": 4,
}
_RACE = {"Amer-Indian-Eskimo": 0, "Asian-Pac-Islander": 1, "Black": 2, "Other": 3, "White": 4}
_WORKCLASS = {
    "Federal-gov": 0, "Local-gov": 0, "State-gov": 0,
    "Private": 1,
    "Self-emp-inc": 2, "Self-emp-not-inc": 2,
    "Without-pay": 3, "Never-worked": 3,
}
_MARRIED = {"Married-civ-spouse", "Married-AF-spouse", "Married-spouse-absent"}


def _encode_row(rec: dict[str, str]) -> list[float]:
    try:
        return [
            float(rec["age"]),
            float(rec["education-num"]),
            float(rec["marital-status"] in _MARRIED),
            float(_RELATIONSHIP[rec["relationship"]]),
            float(_RACE[rec["race"]]),
            float(rec["sex"] == "Male"),
            float(float(rec["capital-gain"]) > 0),
            float(float(rec["capital-loss"]) > 0),
            float(rec["hours-per-week"]),
            float(rec["native-country"] == "United-States"),
            float(_WORKCLASS[rec["workclass"]]),
            float(rec["salary"].rstrip(".") == ">50K"),
        ]
    except KeyError as exc:
        raise DataError(f"unexpected category {exc.args[0]!r}") from exc


def load_adult(path: str | Path) -> TabularDataset:
    """Read ``adult.data``-format rows, drop rows with missing values ('?'),
    and return the ordinal encoding with the binary ``salary`` label last."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path} not found; run scripts/fetch_adult.py first")
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for line_no, cells in enumerate(csv.reader(fh, skipinitialspace=True), start=1):
            if not cells or cells[0].startswith("|"):
                continue
            if len(cells) != len(ADULT_COLUMNS):
                raise DataError(f"row {line_no}: expected {len(ADULT_COLUMNS)} fields, got {len(cells)}")
            cells = [c.strip() for c in cells]
            if "?" in cells:
                continue
            rows.append(_encode_row(dict(zip(ADULT_COLUMNS, cells))))
    if not rows:
        raise DataError(f"{path} contains no complete rows")
    return from_array(np.array(rows), ADULT_FEATURES + (ADULT_LABEL,), name="adult")


def adult_split(
    ds: TabularDataset, seed: int, n_train: int = ADULT_TRAIN_SIZE
) -> tuple[TabularDataset, np.ndarray, TabularDataset, np.ndarray]:
    """Random split into two halves of roughly equal size; returns (X_train, y_train, X_test, y_test)."""
    if not 0 < n_train < ds.n_rows:
        raise DataError(f"n_train must be in (0, {ds.n_rows}), got {n_train}")
    perm = np.random.default_rng(seed).permutation(ds.n_rows)
    tr, te = np.sort(perm[:n_train]), np.sort(perm[n_train:])
    X = ds.drop([ADULT_LABEL])
    y = ds.column(ADULT_LABEL).astype(int)
    return X.take(tr), y[tr], X.take(te), y[te]
