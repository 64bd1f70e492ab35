"""Empirical univariate marginals used for the probability integral transform."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np


@dataclass(frozen=True, eq=False)
class EmpiricalMarginal:
    """Piecewise-linear empirical CDF over the distinct training values.

    Each distinct value ``x_(j)`` sits at its mid-rank plotting position
    ``(r_j - 0.5) / n``; ties share the mid-rank so the table stays strictly
    increasing. CDF outputs are clamped to ``[0.5/n, 1 - 0.5/n]``.
    """

    support: np.ndarray
    probs: np.ndarray
    n: int
    low_resolution: bool = False

    @property
    def lower(self) -> float:
        return 0.5 / self.n

    @property
    def upper(self) -> float:
        return 1.0 - 0.5 / self.n

    def cdf(self, x) -> np.ndarray:
        u = np.interp(np.asarray(x, dtype=float), self.support, self.probs)
        return np.clip(u, self.lower, self.upper)

    def ppf(self, u) -> np.ndarray:
        u = np.clip(np.asarray(u, dtype=float), self.probs[0], self.probs[-1])
        return np.interp(u, self.probs, self.support)

    def to_dict(self) -> dict:
        return {"support": self.support.tolist(), "probs": self.probs.tolist(), "n": self.n}

    @classmethod
    def from_dict(cls, d: Mapping) -> "EmpiricalMarginal":
        support = np.asarray(d["support"], dtype=float)
        return cls(support, np.asarray(d["probs"], dtype=float), int(d["n"]), len(support) < 10)


def fit_marginal(values) -> EmpiricalMarginal:
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("cannot fit a marginal to an empty vector")
    if not np.all(np.isfinite(x)):
        raise ValueError("marginal values must be finite")
    support, counts = np.unique(x, return_counts=True)
    n = x.size
    before = np.concatenate([[0], np.cumsum(counts)[:-1]])
    probs = (before + counts / 2.0) / n
    return EmpiricalMarginal(support, probs, n, low_resolution=support.size < 10)
