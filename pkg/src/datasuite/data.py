"""Tabular data model, CSV ingestion, encoding, standardization and splits."""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"
ONE_HOT = "one-hot"


@dataclass(frozen=True)
class FeatureColumn:
    """Metadata for one column.

    Categorical columns store integer codes into ``levels`` (sorted
    lexicographically); one-hot columns remember the categorical column and
    level they were derived from in ``source``.
    """

    name: str
    kind: str = CONTINUOUS
    range: tuple[float, float] | None = None
    levels: tuple[str, ...] = ()
    source: tuple[str, str] | None = None


@dataclass(frozen=True, eq=False)
class TabularDataset:
    values: np.ndarray
    columns: tuple[FeatureColumn, ...]
    name: str = ""

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim != 2:
            raise DataError(f"values must be 2-D, got shape {values.shape}")
        columns = tuple(self.columns)
        if values.shape[1] != len(columns):
            raise DataError(
                f"{values.shape[1]} value columns but {len(columns)} column descriptors"
            )
        if len(columns) < 1:
            raise DataError("dataset needs at least one column")
        names = [c.name for c in columns]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise DataError(f"duplicate column names: {dupes}")
        bad = ~np.isfinite(values)
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise DataError(f"non-finite value at row {r}, column {names[c]!r}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "columns", columns)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    @property
    def ranges(self) -> np.ndarray:
        """Stored ``[a_i, b_i]`` per column, falling back to observed min/max."""
        out = feature_ranges(self) if self.n_rows else np.zeros((self.n_features, 2))
        for j, col in enumerate(self.columns):
            if col.range is not None:
                out[j] = col.range
        return out

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]

    def take(self, rows) -> "TabularDataset":
        return replace(self, values=self.values[np.asarray(rows)])

    def select(self, names: Sequence[str]) -> "TabularDataset":
        missing = [n for n in names if n not in self.names]
        if missing:
            raise DataError(f"unknown columns: {missing}")
        idx = [self.names.index(n) for n in names]
        return TabularDataset(self.values[:, idx], tuple(self.columns[i] for i in idx), self.name)

    def drop(self, names: Sequence[str]) -> "TabularDataset":
        return self.select([n for n in self.names if n not in set(names)])

    def with_values(self, values: np.ndarray, name: str | None = None) -> "TabularDataset":
        return TabularDataset(values, self.columns, self.name if name is None else name)

    def with_ranges(self, ranges: np.ndarray | None = None) -> "TabularDataset":
        """Return a copy whose columns carry ``ranges`` (default: observed min/max)."""
        ranges = feature_ranges(self) if ranges is None else np.asarray(ranges, dtype=float)
        cols = tuple(
            replace(c, range=(float(lo), float(hi))) for c, (lo, hi) in zip(self.columns, ranges)
        )
        return TabularDataset(self.values, cols, self.name)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.names)
            for row in self.values:
                writer.writerow([repr(float(v)) for v in row])


@dataclass(frozen=True)
class StandardizationParams:
    names: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray
    dropped: tuple[str, ...] = ()

    def apply(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=float) - self.mean) / self.std

    def invert(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=float) * self.std + self.mean

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "dropped": list(self.dropped),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "StandardizationParams":
        return cls(
            tuple(d["names"]),
            np.asarray(d["mean"], dtype=float),
            np.asarray(d["std"], dtype=float),
            tuple(d.get("dropped", ())),
        )


@dataclass(frozen=True)
class SplitSpec:
    proper_fraction: float = 2.0 / 3.0
    seed: int = 0


@dataclass
class EncodingReport:
    """Levels used per categorical column and counts of unseen test levels."""

    levels: dict[str, tuple[str, ...]] = field(default_factory=dict)
    unseen: dict[str, int] = field(default_factory=dict)
    dropped: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "levels": {k: list(v) for k, v in self.levels.items()},
            "unseen": dict(self.unseen),
            "dropped": list(self.dropped),
        }


def _parse_float(cell: str) -> float | None:
    try:
        value = float(cell)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def load_csv(
    path: str | Path,
    schema: Mapping[str, str] | None = None,
    name: str | None = None,
) -> TabularDataset:
    """Read a CSV with a mandatory header row.

    ``schema`` maps column names to ``"continuous"`` or ``"categorical"``.
    Unlisted columns are continuous when every cell parses as a number and
    categorical otherwise.
    """
    path = Path(path)
    schema = dict(schema or {})
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in rows if r]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if not body:
        raise DataError(f"{path}: no data rows")
    unknown = set(schema) - set(header)
    if unknown:
        raise DataError(f"{path}: schema names unknown columns {sorted(unknown)}")
    d = len(header)
    for i, row in enumerate(body, start=1):
        if len(row) != d:
            raise DataError(f"{path}: row {i} has {len(row)} cells, expected {d}")
        for j, cell in enumerate(row):
            if cell.strip() == "":
                raise DataError(f"{path}: missing value at row {i}, column {header[j]!r}")

    columns = []
    values = np.empty((len(body), d))
    for j, col in enumerate(header):
        cells = [row[j].strip() for row in body]
        parsed = [_parse_float(c) for c in cells]
        kind = schema.get(col)
        if kind is None:
            kind = CONTINUOUS if all(p is not None for p in parsed) else CATEGORICAL
        if kind == CONTINUOUS:
            for i, p in enumerate(parsed, start=1):
                if p is None:
                    raise DataError(
                        f"{path}: non-numeric cell {cells[i - 1]!r} at row {i}, column {col!r}"
                    )
            values[:, j] = parsed
            columns.append(FeatureColumn(col))
        elif kind == CATEGORICAL:
            levels = tuple(sorted(set(cells)))
            lookup = {lv: k for k, lv in enumerate(levels)}
            values[:, j] = [lookup[c] for c in cells]
            columns.append(FeatureColumn(col, CATEGORICAL, levels=levels))
        else:
            raise DataError(f"unknown column kind {kind!r} for {col!r}")
    return TabularDataset(values, tuple(columns), name or path.stem)


def encode_onehot(
    ds: TabularDataset,
    levels: Mapping[str, Sequence[str]] | None = None,
) -> tuple[TabularDataset, EncodingReport]:
    """Replace categorical columns by one indicator column per level.

    Pass the ``levels`` from the training split's report when encoding test
    data; levels absent from it encode to all-zero indicators and are counted
    in ``report.unseen``.
    """
    report = EncodingReport()
    cols: list[FeatureColumn] = []
    blocks: list[np.ndarray] = []
    for j, col in enumerate(ds.columns):
        x = ds.values[:, j]
        if col.kind != CATEGORICAL:
            cols.append(col)
            blocks.append(x[:, None])
            continue
        observed = [col.levels[int(c)] for c in x]
        if levels is not None and col.name in levels:
            use = tuple(sorted(levels[col.name]))
        else:
            use = tuple(sorted(set(observed)))
        report.levels[col.name] = use
        index = {lv: k for k, lv in enumerate(use)}
        block = np.zeros((len(x), len(use)))
        unseen = 0
        for i, lv in enumerate(observed):
            k = index.get(lv)
            if k is None:
                unseen += 1
            else:
                block[i, k] = 1.0
        if unseen:
            warnings.warn(f"{unseen} rows with unseen levels in {col.name!r}; encoded as zeros")
        report.unseen[col.name] = unseen
        for lv in use:
            cols.append(FeatureColumn(f"{col.name}={lv}", ONE_HOT, (0.0, 1.0), source=(col.name, lv)))
        blocks.append(block)
    values = np.hstack(blocks) if blocks else ds.values
    return TabularDataset(values, tuple(cols), ds.name), report


def standardize(
    ds: TabularDataset, params: StandardizationParams | None = None
) -> tuple[TabularDataset, StandardizationParams]:
    """Map every feature to zero mean and unit variance.

    When fitting, zero-variance features are dropped (with a warning) and
    listed in ``params.dropped``. When ``params`` is given the same features
    are selected and transformed.
    """
    if params is None:
        if ds.n_rows == 0:
            raise DataError("cannot standardize an empty dataset")
        mean = ds.values.mean(axis=0)
        std = ds.values.std(axis=0)
        keep = std > 1e-12 * np.maximum(1.0, np.abs(mean))
        dropped = tuple(n for n, k in zip(ds.names, keep) if not k)
        if dropped:
            warnings.warn(f"dropping zero-variance features: {list(dropped)}")
        params = StandardizationParams(
            tuple(n for n, k in zip(ds.names, keep) if k), mean[keep], std[keep], dropped
        )
    sub = ds.select(params.names)
    z = params.apply(sub.values)
    cols = []
    for col, mu, sd in zip(sub.columns, params.mean, params.std):
        rng = None if col.range is None else ((col.range[0] - mu) / sd, (col.range[1] - mu) / sd)
        cols.append(replace(col, range=rng))
    return TabularDataset(z, tuple(cols), ds.name), params


def drop_constant_features(ds: TabularDataset) -> tuple[TabularDataset, list[str]]:
    """Remove columns with a single distinct value."""
    constant = [n for j, n in enumerate(ds.names) if np.ptp(ds.values[:, j]) == 0.0]
    if constant:
        warnings.warn(f"dropping zero-variance features: {constant}")
        ds = ds.drop(constant)
    return ds, constant


def feature_ranges(ds: TabularDataset) -> np.ndarray:
    """Per-feature ``[min, max]`` over the rows of ``ds``; one-hot columns are [0, 1]."""
    if ds.n_rows == 0:
        raise DataError("feature ranges of an empty dataset")
    out = np.column_stack([ds.values.min(axis=0), ds.values.max(axis=0)])
    for j, col in enumerate(ds.columns):
        if col.kind == ONE_HOT:
            out[j] = (0.0, 1.0)
    return out


def split_indices(n: int, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    if n < 4:
        raise DataError(f"need at least 4 rows to split, got {n}")
    if not 0.0 < spec.proper_fraction < 1.0:
        raise DataError(f"proper_fraction must be in (0, 1), got {spec.proper_fraction}")
    n_proper = int(math.floor(n * spec.proper_fraction))
    if n_proper == 0 or n_proper == n:
        raise DataError(f"proper_fraction {spec.proper_fraction} leaves an empty partition for n={n}")
    perm = np.random.default_rng(spec.seed).permutation(n)
    return np.sort(perm[:n_proper]), np.sort(perm[n_proper:])


def split_proper_calibration(
    ds: TabularDataset, spec: SplitSpec = SplitSpec()
) -> tuple[TabularDataset, TabularDataset]:
    """Random disjoint proper-training / calibration partition."""
    proper, cal = split_indices(ds.n_rows, spec)
    return ds.take(proper), ds.take(cal)


def from_array(values, names: Sequence[str] | None = None, name: str = "") -> TabularDataset:
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if names is None:
        names = [f"x{j + 1}" for j in range(values.shape[1])]
    return TabularDataset(values, tuple(FeatureColumn(n) for n in names), name)
