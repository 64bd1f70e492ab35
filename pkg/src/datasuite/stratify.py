"""Inconsistency flags, uncertainty scores, certain/uncertain groups and prototypes."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .data import ONE_HOT, TabularDataset
from .errors import DataError
from .intervals import IntervalSet
from .representer import Representer

DEFAULT_LAMBDA = 0.5
PROPORTIONS = tuple(round(0.05 * k, 2) for k in range(1, 21))

CERTAIN = "certain"
UNCERTAIN = "uncertain"
OTHER = "other"


def inconsistency(intervals: IntervalSet, lam: float = DEFAULT_LAMBDA) -> tuple[np.ndarray, np.ndarray]:
    """Fraction of features outside their interval, and the ``nu > lam`` flag."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must be in [0, 1], got {lam}")
    nu = (~intervals.contains()).mean(axis=1)
    return nu, nu > lam


def uncertainty(intervals: IntervalSet) -> np.ndarray:
    """Mean interval width, each feature scaled by its training range."""
    span = intervals.ranges[:, 1] - intervals.ranges[:, 0]
    if np.any(span <= 0):
        raise DataError("uncertainty needs b_i > a_i for every feature")
    return (intervals.width / span).mean(axis=1)


def rank_by_uncertainty(delta) -> np.ndarray:
    """Instance indices sorted by ascending uncertainty, ties by index."""
    return np.argsort(np.asarray(delta), kind="stable")


def group_size(n: int, p: float) -> int:
    return int(math.ceil(round(p * n, 9)))


def stratify_by_uncertainty(delta, p: float) -> tuple[np.ndarray, np.ndarray]:
    """The ``ceil(p n)`` most certain and most uncertain instances."""
    delta = np.asarray(delta)
    n = delta.size
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must be in (0, 1], got {p}")
    m = group_size(n, p)
    if p * n < 1:
        raise DataError(f"p={p} selects no instances out of {n}")
    order = rank_by_uncertainty(delta)
    return order[:m], order[n - m:]


@dataclass(frozen=True, eq=False)
class StratificationReport:
    nu: np.ndarray
    inconsistent: np.ndarray
    delta: np.ndarray
    order: np.ndarray
    lam: float

    @property
    def n(self) -> int:
        return self.delta.size

    def groups(self, p: float) -> tuple[np.ndarray, np.ndarray]:
        m = group_size(self.n, p)
        if m < 1:
            raise DataError(f"p={p} selects no instances out of {self.n}")
        return self.order[:m], self.order[self.n - m:]

    def labels(self, p: float) -> np.ndarray:
        """``certain`` / ``uncertain`` / ``other`` per instance (p <= 0.5)."""
        if p > 0.5:
            raise ValueError("groups overlap for p > 0.5")
        cert, uncert = self.groups(p)
        out = np.full(self.n, OTHER, dtype=object)
        out[cert] = CERTAIN
        out[uncert] = UNCERTAIN
        return out

    def to_dict(self, proportions: Sequence[float] = PROPORTIONS) -> dict:
        groups = {}
        for p in proportions:
            cert, uncert = self.groups(p)
            groups[f"{p:.2f}"] = {"certain": cert.tolist(), "uncertain": uncert.tolist()}
        return {
            "lambda": self.lam,
            "n_instances": self.n,
            "n_inconsistent": int(self.inconsistent.sum()),
            "nu": self.nu.tolist(),
            "inconsistent": self.inconsistent.astype(int).tolist(),
            "delta": self.delta.tolist(),
            "ranking": self.order.tolist(),
            "groups": groups,
        }

    def ranking_to_csv(self, path: str | Path) -> None:
        rank = np.empty(self.n, dtype=int)
        rank[self.order] = np.arange(self.n)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["instance", "rank", "delta", "nu", "inconsistent"])
            for i in range(self.n):
                w.writerow([i, int(rank[i]), repr(float(self.delta[i])), repr(float(self.nu[i])), int(self.inconsistent[i])])


def build_report(intervals: IntervalSet, lam: float = DEFAULT_LAMBDA) -> StratificationReport:
    nu, flag = inconsistency(intervals, lam)
    delta = uncertainty(intervals)
    return StratificationReport(nu, flag, delta, rank_by_uncertainty(delta), lam)


def lambda_sweep(
    nu, lambdas: Sequence[float], score: Callable[[np.ndarray], float] | None = None
) -> list[dict]:
    """Flag counts (and optionally a score of the flagged set) for each lambda."""
    nu = np.asarray(nu)
    rows = []
    for lam in lambdas:
        idx = np.flatnonzero(nu > lam)
        value = score(idx) if (score is not None and idx.size) else None
        rows.append({"lambda": float(lam), "flagged": int(idx.size), "score": value})
    return rows


@dataclass(frozen=True)
class Prototype:
    label: str
    size: int
    centroid: np.ndarray
    nearest_neighbour: np.ndarray | None = None


def _onehot_blocks(ds: TabularDataset) -> dict[str, list[int]]:
    blocks: dict[str, list[int]] = {}
    for j, col in enumerate(ds.columns):
        if col.kind == ONE_HOT and col.source is not None:
            blocks.setdefault(col.source[0], []).append(j)
    return blocks


def _snap_onehot(vec: np.ndarray, blocks: Mapping[str, list[int]]) -> np.ndarray:
    vec = vec.copy()
    for cols in blocks.values():
        best = cols[int(np.argmax(vec[cols]))]
        vec[cols] = 0.0
        vec[best] = 1.0
    return vec


def prototypes(
    ds: TabularDataset,
    labels: Sequence[str],
    reference: TabularDataset | None = None,
    scale: np.ndarray | None = None,
) -> dict[str, Prototype]:
    """Average prototype per label, plus a nearest-neighbour prototype.

    The centroid is the raw-space mean, with each one-hot block replaced by
    its argmax level. With a ``reference`` set, every group member is matched
    to its Euclidean nearest neighbour in the reference (features divided by
    ``scale``, default the reference's standard deviation) and those
    neighbours are averaged the same way.
    """
    labels = np.asarray(labels, dtype=object)
    if labels.size != ds.n_rows:
        raise DataError("one label per row required")
    blocks = _onehot_blocks(ds)
    if reference is not None:
        if reference.names != ds.names:
            raise DataError("reference schema differs from dataset schema")
        if scale is None:
            scale = reference.values.std(axis=0)
        scale = np.where(np.asarray(scale) > 0, scale, 1.0)
    out = {}
    for label in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == label)
        if idx.size == 0:
            raise DataError(f"empty group {label!r}")
        rows = ds.values[idx]
        centroid = _snap_onehot(rows.mean(axis=0), blocks)
        nn = None
        if reference is not None:
            nn_idx = nearest_neighbours(rows / scale, reference.values / scale)
            nn = _snap_onehot(reference.values[nn_idx].mean(axis=0), blocks)
        out[label] = Prototype(label, int(idx.size), centroid, nn)
    return out


def nearest_neighbours(queries: np.ndarray, reference: np.ndarray, chunk: int = 2048) -> np.ndarray:
    """Index of the closest reference row for each query row (first on ties)."""
    queries = np.atleast_2d(queries)
    out = np.empty(queries.shape[0], dtype=int)
    ref_sq = np.sum(reference**2, axis=1)
    for start in range(0, queries.shape[0], chunk):
        q = queries[start:start + chunk]
        dist = ref_sq[None, :] - 2.0 * q @ reference.T + np.sum(q**2, axis=1)[:, None]
        out[start:start + chunk] = np.argmin(dist, axis=1)
    return out


def project_2d(rep: Representer, ds: TabularDataset, labels: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    """Coordinates on the first two principal components, with labels attached."""
    if len(rep.names) < 2:
        raise DataError("a 2-D projection needs at least two features")
    labels = np.asarray(labels, dtype=object)
    if labels.size != ds.n_rows:
        raise DataError("one label per row required")
    coords = rep.standardized(ds) @ rep.basis[:, :2]
    return coords, labels


def projection_to_csv(path: str | Path, coords: np.ndarray, labels: Sequence[str]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["instance", "pc1", "pc2", "label"])
        for i, ((a, b), lab) in enumerate(zip(coords, labels)):
            w.writerow([i, repr(float(a)), repr(float(b)), lab])
