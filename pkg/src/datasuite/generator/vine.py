"""D-vine copula: fitting, inverse-Rosenblatt sampling and JSON round-trip.

Notation used below, for tree ``t`` (1-based) and edge ``k`` (0-based) of a
D-vine over the ordered variables ``x_0 .. x_{d-1}``::

    left[t][k]  = F(x_k     | x_{k+1}, ..., x_{k+t-1})
    right[t][k] = F(x_{k+t} | x_{k+1}, ..., x_{k+t-1})

and the pair copula ``C_{t,k}`` couples ``(left[t][k], right[t][k])``.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy import stats

from ..data import FeatureColumn, TabularDataset
from ..errors import DataError, NumericalError
from .bicop import PairCopula, fit_pair_copula
from .marginal import EmpiricalMarginal, fit_marginal

ORDER_GIVEN = "given"
ORDER_MAX_TAU = "max_tau"


@dataclass(frozen=True, eq=False)
class VineModel:
    names: tuple[str, ...]
    order: tuple[int, ...]
    trees: tuple[tuple[PairCopula, ...], ...]
    marginals: tuple[EmpiricalMarginal, ...]
    truncation: int | None = None

    @property
    def dim(self) -> int:
        return len(self.names)

    @property
    def n_pair_copulas(self) -> int:
        return sum(len(t) for t in self.trees)

    def pair(self, t: int, k: int) -> PairCopula:
        """Copula of edge ``k`` in tree ``t`` (1-based); independence past truncation."""
        if t > len(self.trees):
            return PairCopula()
        return self.trees[t - 1][k]

    def to_dict(self) -> dict:
        return {
            "kind": "d-vine",
            "names": list(self.names),
            "order": list(self.order),
            "truncation": self.truncation,
            "trees": [[c.to_dict() for c in tree] for tree in self.trees],
            "marginals": [m.to_dict() for m in self.marginals],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "VineModel":
        return cls(
            tuple(d["names"]),
            tuple(int(i) for i in d["order"]),
            tuple(tuple(PairCopula.from_dict(c) for c in tree) for tree in d["trees"]),
            tuple(EmpiricalMarginal.from_dict(m) for m in d["marginals"]),
            d.get("truncation"),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "VineModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def max_tau_order(u: np.ndarray) -> tuple[int, ...]:
    """Greedy Hamiltonian path that chains strongly dependent variables.

    Starts from the pair with the largest ``|tau|`` and repeatedly attaches,
    at whichever end scores higher, the unused variable with the largest
    ``|tau|`` to that end.
    """
    d = u.shape[1]
    if d < 3:
        return tuple(range(d))
    tau = np.eye(d)
    for i in range(d):
        for j in range(i + 1, d):
            tau[i, j] = tau[j, i] = abs(stats.kendalltau(u[:, i], u[:, j]).statistic)
    np.fill_diagonal(tau, -1.0)
    i, j = np.unravel_index(np.argmax(tau), tau.shape)
    path = [int(i), int(j)]
    free = set(range(d)) - set(path)
    while free:
        cand = sorted(free)
        head = max(cand, key=lambda c: tau[path[0], c])
        tail = max(cand, key=lambda c: tau[path[-1], c])
        if tau[path[0], head] > tau[path[-1], tail]:
            path.insert(0, head)
            free.remove(head)
        else:
            path.append(tail)
            free.remove(tail)
    return tuple(path)


def fit_dvine(
    ds: TabularDataset,
    truncation: int | None = None,
    order: str = ORDER_GIVEN,
) -> VineModel:
    """Fit empirical marginals and a D-vine of pair copulas to ``ds``.

    Trees deeper than ``truncation`` are left as independence copulas.
    """
    d = ds.n_features
    if d < 2:
        raise DataError(f"a vine needs at least 2 features, got {d}")
    if truncation is not None and truncation < 1:
        raise ValueError("truncation must be >= 1")
    marginals = tuple(fit_marginal(ds.values[:, j]) for j in range(d))
    u_all = np.column_stack([m.cdf(ds.values[:, j]) for j, m in enumerate(marginals)])
    if order == ORDER_GIVEN:
        perm = tuple(range(d))
    elif order == ORDER_MAX_TAU:
        perm = max_tau_order(u_all)
    else:
        raise ValueError(f"unknown vine order {order!r}")
    u = u_all[:, perm]

    depth = d - 1 if truncation is None else min(truncation, d - 1)
    left = [u[:, k] for k in range(d - 1)]
    right = [u[:, k + 1] for k in range(d - 1)]
    trees = []
    for t in range(1, depth + 1):
        tree = tuple(fit_pair_copula(left[k], right[k]) for k in range(d - t))
        trees.append(tree)
        if t == depth:
            break
        new_left = [tree[k].hfunc(left[k], right[k]) for k in range(d - t - 1)]
        new_right = [tree[k + 1].hfunc(right[k + 1], left[k + 1]) for k in range(d - t - 1)]
        left, right = new_left, new_right
    return VineModel(ds.names, perm, tuple(trees), marginals, truncation)


def _sample_uniform(model: VineModel, w: np.ndarray) -> np.ndarray:
    """Inverse Rosenblatt transform of independent uniforms ``w`` (vine order)."""
    n, d = w.shape
    u = np.empty_like(w)
    u[:, 0] = w[:, 0]
    # lefts[t] holds F(x_{j-t} | x_{j-t+1..j-1}) for the variable about to be drawn
    lefts: dict[int, np.ndarray] = {1: u[:, 0]}
    for j in range(1, d):
        q = w[:, j]
        rights = {}
        for t in range(j, 0, -1):
            k = j - t
            q = model.pair(t, k).hinv(q, lefts[t])
            rights[t] = q
        u[:, j] = q
        new_lefts = {1: q}
        for t in range(1, j + 1):
            k = j - t
            new_lefts[t + 1] = model.pair(t, k).hfunc(lefts[t], rights[t])
        lefts = new_lefts
    return u


def sample_dvine(model: VineModel, n: int, seed: int, max_retries: int = 10) -> TabularDataset:
    """Draw ``n`` rows from the fitted vine, on the original data scale."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    d = model.dim
    w = rng.random((n, d))
    u = _sample_uniform(model, w)
    for attempt in range(max_retries):
        bad = ~np.all(np.isfinite(u), axis=1)
        if not bad.any():
            break
        warnings.warn(f"resampling {int(bad.sum())} rows after non-finite inverse h-function")
        u[bad] = _sample_uniform(model, rng.random((int(bad.sum()), d)))
    if not np.all(np.isfinite(u)):
        raise NumericalError("inverse h-function kept failing while sampling the vine")
    out = np.empty_like(u)
    for pos, col in enumerate(model.order):
        out[:, col] = model.marginals[col].ppf(u[:, pos])
    cols = tuple(FeatureColumn(name) for name in model.names)
    return TabularDataset(out, cols, "copula-samples")


def vine_loglik(model: VineModel, ds: TabularDataset) -> float:
    """Copula log-likelihood of ``ds`` under the vine (marginals excluded)."""
    u_all = np.column_stack([m.cdf(ds.values[:, j]) for j, m in enumerate(model.marginals)])
    u = u_all[:, model.order]
    d = model.dim
    left = [u[:, k] for k in range(d - 1)]
    right = [u[:, k + 1] for k in range(d - 1)]
    total = 0.0
    for t in range(1, len(model.trees) + 1):
        tree = model.trees[t - 1]
        total += sum(float(np.sum(tree[k].logpdf(left[k], right[k]))) for k in range(d - t))
        if t == d - 1:
            break
        left, right = (
            [tree[k].hfunc(left[k], right[k]) for k in range(d - t - 1)],
            [tree[k + 1].hfunc(right[k + 1], left[k + 1]) for k in range(d - t - 1)],
        )
    return total
