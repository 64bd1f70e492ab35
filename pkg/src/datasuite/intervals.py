"""Per-instance, per-feature conformal intervals."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True, eq=False)
class IntervalSet:
    """Intervals ``[center - eps * scale, center + eps * scale]``.

    Arrays are ``(n_instances, n_features)`` except ``eps`` (one per feature)
    and ``ranges`` (``(n_features, 2)``, the training ranges ``[a_i, b_i]``).
    Bounds are never clipped to the ranges; see :meth:`clipped`.
    """

    names: tuple[str, ...]
    center: np.ndarray
    scale: np.ndarray
    eps: np.ndarray
    ranges: np.ndarray
    observed: np.ndarray | None = None

    @property
    def lower(self) -> np.ndarray:
        return self.center - self.eps * self.scale

    @property
    def upper(self) -> np.ndarray:
        return self.center + self.eps * self.scale

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def n_instances(self) -> int:
        return self.center.shape[0]

    @property
    def n_features(self) -> int:
        return self.center.shape[1]

    def clipped(self) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.ranges[:, 0], self.ranges[:, 1]
        return np.clip(self.lower, lo, hi), np.clip(self.upper, lo, hi)

    def contains(self) -> np.ndarray:
        """Boolean matrix: observed value inside its interval."""
        obs = self._require_observed()
        return (obs >= self.lower) & (obs <= self.upper)

    def scores(self) -> np.ndarray:
        """Normalized non-conformity of the observed values."""
        obs = self._require_observed()
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.abs(obs - self.center) / self.scale

    def take(self, rows) -> "IntervalSet":
        rows = np.asarray(rows)
        obs = None if self.observed is None else self.observed[rows]
        return IntervalSet(self.names, self.center[rows], self.scale[rows], self.eps, self.ranges, obs)

    def select(self, features) -> "IntervalSet":
        idx = [self.names.index(f) if isinstance(f, str) else int(f) for f in features]
        obs = None if self.observed is None else self.observed[:, idx]
        return IntervalSet(
            tuple(self.names[i] for i in idx),
            self.center[:, idx],
            self.scale[:, idx],
            self.eps[idx],
            self.ranges[idx],
            obs,
        )

    def to_csv(self, path: str | Path) -> None:
        """Long format: one row per (instance, feature)."""
        lo, hi = self.lower, self.upper
        gamma = self.scores() if self.observed is not None else None
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["instance", "feature", "lower", "upper", "observed", "gamma"])
            for i in range(self.n_instances):
                for j, name in enumerate(self.names):
                    obs = "" if self.observed is None else repr(float(self.observed[i, j]))
                    g = "" if gamma is None else repr(float(gamma[i, j]))
                    w.writerow([i, name, repr(float(lo[i, j])), repr(float(hi[i, j])), obs, g])

    def _require_observed(self) -> np.ndarray:
        if self.observed is None:
            raise ValueError("interval set has no observed values")
        return self.observed
