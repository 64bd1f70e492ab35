"""Interval quality (coverage, deficit, excess) and mean performance improvement."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .intervals import IntervalSet
from .stratify import PROPORTIONS, StratificationReport


@dataclass(frozen=True)
class IntervalQuality:
    coverage: float
    deficit: float
    excess: float
    per_feature: dict[str, dict[str, float]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "coverage": self.coverage,
            "deficit": self.deficit,
            "excess": self.excess,
            "per_feature": self.per_feature,
        }


def quality_terms(observed, lower, upper) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Elementwise coverage indicator, deficit and excess contributions."""
    x, lo, hi = (np.asarray(a, dtype=float) for a in (observed, lower, upper))
    inside = (x >= lo) & (x <= hi)
    dist_lo, dist_hi = np.abs(x - lo), np.abs(x - hi)
    deficit = np.where(inside, 0.0, np.minimum(dist_lo, dist_hi))
    excess = np.where(inside, np.minimum(x - lo, hi - x), 0.0)
    return inside, deficit, excess


def interval_quality(intervals: IntervalSet) -> IntervalQuality:
    """Coverage, deficit and excess pooled over all (instance, feature) pairs."""
    if intervals.observed is None:
        raise ValueError("interval quality needs observed values")
    inside, deficit, excess = quality_terms(intervals.observed, intervals.lower, intervals.upper)
    per_feature = {
        name: {
            "coverage": float(inside[:, j].mean()),
            "deficit": float(deficit[:, j].mean()),
            "excess": float(excess[:, j].mean()),
        }
        for j, name in enumerate(intervals.names)
    }
    return IntervalQuality(float(inside.mean()), float(deficit.mean()), float(excess.mean()), per_feature)


@dataclass(frozen=True)
class MpiResult:
    proportions: tuple[float, ...]
    acc_certain: tuple[float, ...]
    acc_uncertain: tuple[float, ...]
    mpi: float
    skipped: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {
            "mpi": self.mpi,
            "proportions": list(self.proportions),
            "acc_certain": list(self.acc_certain),
            "acc_uncertain": list(self.acc_uncertain),
            "skipped": list(self.skipped),
        }

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["p", "acc_certain", "acc_uncertain", "difference"])
            for p, a, b in zip(self.proportions, self.acc_certain, self.acc_uncertain):
                w.writerow([p, repr(a), repr(b), repr(a - b)])


def mpi(
    accuracy: Callable[[np.ndarray], float],
    report: StratificationReport,
    proportions: Sequence[float] = PROPORTIONS,
) -> MpiResult:
    """Mean of ``Acc(Cert_p) - Acc(Uncert_p)`` over the proportions.

    ``accuracy`` maps an array of instance indices to the downstream accuracy
    on that subset. For ``p > 0.5`` the two groups overlap. Proportions that
    select no instance are skipped and listed in ``skipped``.
    """
    kept, cert_acc, uncert_acc, skipped = [], [], [], []
    for p in proportions:
        m = int(math.ceil(round(p * report.n, 9)))
        if m < 1:
            skipped.append(float(p))
            continue
        cert, uncert = report.groups(p)
        kept.append(float(p))
        cert_acc.append(float(accuracy(cert)))
        uncert_acc.append(float(accuracy(uncert)))
    diffs = np.subtract(cert_acc, uncert_acc)
    value = float(diffs.mean()) if diffs.size else math.nan
    return MpiResult(tuple(kept), tuple(cert_acc), tuple(uncert_acc), value, tuple(skipped))
