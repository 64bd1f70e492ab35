"""Feature-wise inductive conformal prediction with normalized scores.

For each feature ``i`` a regressor ``g_i`` reconstructs ``x_i`` from the latent
representation, a normalizer ``sigma_i`` estimates how hard that
reconstruction is, and the calibration set fixes a critical score ``eps_i``.
Intervals are ``g_i(f(x)) +/- eps_i * sigma_i(x)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np
from sklearn.neighbors import KNeighborsRegressor
from sklearn.tree import DecisionTreeRegressor

from .data import TabularDataset
from .errors import DataError
from .intervals import IntervalSet
from .representer import Representer

LOG_GUARD = 1e-8
FLOOR_FRACTION = 1e-6
TREE_PARAMS = {"max_depth": None, "min_samples_split": 2, "min_samples_leaf": 5}
KNN_NEIGHBORS = 20

NORMALIZER_KNN = "knn"
NORMALIZER_TREE = "tree"
INPUT_FEATURES = "features"
INPUT_LATENT = "latent"


class TreeTable:
    """Array form of a fitted regression tree, enough to predict and serialize."""

    def __init__(self, left, right, feature, threshold, value):
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.value = np.asarray(value, dtype=float)

    @classmethod
    def from_sklearn(cls, model: DecisionTreeRegressor) -> "TreeTable":
        t = model.tree_
        return cls(t.children_left, t.children_right, t.feature, t.threshold, t.value[:, 0, 0])

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = self.left[node] >= 0
        while active.any():
            r, nd = rows[active], node[active]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.left[node] >= 0
        return self.value[node]

    def to_dict(self) -> dict:
        return {
            "type": "tree",
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "value": self.value.tolist(),
        }


class KnnTable:
    """k-nearest-neighbour mean regressor that remembers its training set."""

    def __init__(self, X, y, k: int):
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.k = min(int(k), len(self.y))
        self._model = KNeighborsRegressor(n_neighbors=self.k, algorithm="brute").fit(self.X, self.y)

    def predict(self, X) -> np.ndarray:
        return self._model.predict(np.asarray(X, dtype=float))

    def to_dict(self, shared_X: np.ndarray | None = None) -> dict:
        same = shared_X is not None and shared_X.shape == self.X.shape and np.array_equal(shared_X, self.X)
        return {"type": "knn", "k": self.k, "X": "shared" if same else self.X.tolist(), "y": self.y.tolist()}


def _model_from_dict(d: Mapping, shared_X=None):
    if d["type"] == "tree":
        return TreeTable(d["left"], d["right"], d["feature"], d["threshold"], d["value"])
    if d["type"] == "knn":
        X = shared_X if isinstance(d["X"], str) and d["X"] == "shared" else d["X"]
        if X is None:
            raise ValueError("knn model refers to missing shared inputs")
        return KnnTable(X, d["y"], d["k"])
    raise ValueError(f"unknown model type {d['type']!r}")


def _model_dict(model, shared_X) -> dict:
    return model.to_dict(shared_X) if isinstance(model, KnnTable) else model.to_dict()


def _fit_tree(X, y, seed: int = 0) -> TreeTable:
    return TreeTable.from_sklearn(DecisionTreeRegressor(random_state=seed, **TREE_PARAMS).fit(X, y))


@dataclass(frozen=True, eq=False)
class FeatureRegressor:
    name: str
    model: TreeTable

    def predict(self, latents) -> np.ndarray:
        return self.model.predict(latents)


@dataclass(frozen=True, eq=False)
class Normalizer:
    """``sigma(x) = exp(model(x)) + beta``; ``model`` predicts log residuals.

    ``source`` says whether the model reads latents or standardized features.
    A normalizer fitted to all-zero residuals has no model and returns beta.
    """

    name: str
    model: TreeTable | KnnTable | None
    beta: float
    source: str = INPUT_LATENT

    @property
    def constant(self) -> bool:
        return self.model is None

    def sigma(self, inputs) -> np.ndarray:
        inputs = np.asarray(inputs, dtype=float)
        if self.model is None:
            return np.full(inputs.shape[0], self.beta)
        return np.exp(self.model.predict(inputs)) + self.beta


@dataclass(frozen=True, eq=False)
class ConformalModel:
    representer: Representer
    regressors: tuple[FeatureRegressor, ...]
    normalizers: tuple[Normalizer, ...]
    eps: np.ndarray
    alpha: float
    ranges: np.ndarray
    n_calibration: int
    flags: tuple[str, ...] = field(default=())

    @property
    def names(self) -> tuple[str, ...]:
        return self.representer.names

    def _shared_inputs(self) -> np.ndarray | None:
        knn = [n.model for n in self.normalizers if isinstance(n.model, KnnTable)]
        return knn[0].X if knn else None

    def to_dict(self) -> dict:
        shared = self._shared_inputs()
        return {
            "representer": self.representer.to_dict(),
            "normalizer_inputs": None if shared is None else shared.tolist(),
            "regressors": [{"name": r.name, "model": r.model.to_dict()} for r in self.regressors],
            "normalizers": [
                {
                    "name": n.name,
                    "beta": n.beta,
                    "source": n.source,
                    "model": None if n.model is None else _model_dict(n.model, shared),
                }
                for n in self.normalizers
            ],
            "eps": [e if math.isfinite(e) else "inf" for e in self.eps.tolist()],
            "alpha": self.alpha,
            "ranges": self.ranges.tolist(),
            "n_calibration": self.n_calibration,
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ConformalModel":
        shared = d.get("normalizer_inputs")
        shared = None if shared is None else np.asarray(shared, dtype=float)
        return cls(
            Representer.from_dict(d["representer"]),
            tuple(FeatureRegressor(r["name"], _model_from_dict(r["model"])) for r in d["regressors"]),
            tuple(
                Normalizer(
                    n["name"],
                    None if n["model"] is None else _model_from_dict(n["model"], shared),
                    float(n["beta"]),
                    n["source"],
                )
                for n in d["normalizers"]
            ),
            np.array([float(e) for e in d["eps"]]),
            float(d["alpha"]),
            np.asarray(d["ranges"], dtype=float),
            int(d["n_calibration"]),
            tuple(d.get("flags", ())),
        )


def _target_matrix(targets) -> np.ndarray:
    values = targets.values if isinstance(targets, TabularDataset) else np.asarray(targets, dtype=float)
    return values[:, None] if values.ndim == 1 else values


def fit_feature_regressors(
    latents, targets: TabularDataset | np.ndarray, names: Sequence[str] | None = None
) -> list[FeatureRegressor]:
    """One regression tree per feature, mapping latents to that feature.

    The trees see only the latent representation, never the target feature.
    """
    latents = np.asarray(latents, dtype=float)
    y = _target_matrix(targets)
    if names is None:
        names = targets.names if isinstance(targets, TabularDataset) else [f"x{j + 1}" for j in range(y.shape[1])]
    if latents.shape[0] != y.shape[0]:
        raise DataError("latents and targets differ in row count")
    if y.shape[0] < TREE_PARAMS["min_samples_leaf"]:
        raise DataError(f"need at least {TREE_PARAMS['min_samples_leaf']} rows to fit the regressors")
    return [FeatureRegressor(name, _fit_tree(latents, y[:, j])) for j, name in enumerate(names)]


def fit_normalizers(
    latents,
    targets: TabularDataset | np.ndarray,
    regressors: Sequence[FeatureRegressor],
    ranges: np.ndarray,
    kind: str = NORMALIZER_KNN,
    inputs=None,
    floor_fraction: float = FLOOR_FRACTION,
    log_guard: float = LOG_GUARD,
) -> list[Normalizer]:
    """Fit one log-residual model per feature on the proper training split.

    Residuals are ``x_i - g_i(f(x))``; the model learns ``ln(|r| + log_guard)``
    from ``inputs`` (standardized features) when given, else from the latents.
    The evaluation floor is ``beta = floor_fraction * (b_i - a_i)``.
    """
    if floor_fraction <= 0 or log_guard <= 0:
        raise ValueError("floor_fraction and log_guard must be positive")
    latents = np.asarray(latents, dtype=float)
    y = _target_matrix(targets)
    design = latents if inputs is None else np.asarray(inputs, dtype=float)
    source = INPUT_LATENT if inputs is None else INPUT_FEATURES
    ranges = np.asarray(ranges, dtype=float)
    out = []
    for j, reg in enumerate(regressors):
        resid = np.abs(y[:, j] - reg.predict(latents))
        beta = floor_fraction * float(ranges[j, 1] - ranges[j, 0])
        if beta <= 0:
            beta = floor_fraction
        if np.all(resid <= 0.0):
            warnings.warn(f"all residuals of {reg.name!r} are zero; normalizer is the constant floor")
            out.append(Normalizer(reg.name, None, beta, source))
            continue
        log_r = np.log(resid + log_guard)
        if kind == NORMALIZER_KNN:
            model = KnnTable(design, log_r, KNN_NEIGHBORS)
        elif kind == NORMALIZER_TREE:
            model = _fit_tree(design, log_r)
        else:
            raise ValueError(f"unknown normalizer kind {kind!r}")
        out.append(Normalizer(reg.name, model, beta, source))
    return out


def critical_index(n: int, alpha: float) -> int:
    """1-based rank ``ceil((n + 1)(1 - alpha))`` in exact decimal arithmetic."""
    q = (n + 1) * (1 - Fraction(repr(float(alpha))))
    return -((-q.numerator) // q.denominator)


def critical_score(scores, alpha: float) -> float:
    """The ``ceil((n+1)(1-alpha))``-th smallest score, or ``inf`` when that exceeds ``n``."""
    scores = np.asarray(scores, dtype=float).ravel()
    if scores.size == 0:
        raise DataError("empty calibration set")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    k = critical_index(scores.size, alpha)
    if k > scores.size:
        return math.inf
    return float(np.partition(scores, k - 1)[k - 1])


def _normalizer_inputs(norm: Normalizer, latents, standardized) -> np.ndarray:
    return standardized if norm.source == INPUT_FEATURES else latents


def calibration_scores(
    representer: Representer,
    regressors: Sequence[FeatureRegressor],
    normalizers: Sequence[Normalizer],
    cal: TabularDataset,
) -> np.ndarray:
    """Normalized non-conformity ``|x_i - g_i(f(x))| / sigma_i(x)`` per row and feature."""
    z = representer.standardized(cal)
    h = z @ representer.components
    cols = []
    for j, (reg, norm) in enumerate(zip(regressors, normalizers)):
        sigma = norm.sigma(_normalizer_inputs(norm, h, z))
        cols.append(np.abs(cal.values[:, j] - reg.predict(h)) / sigma)
    return np.column_stack(cols)


def calibrate(
    representer: Representer,
    regressors: Sequence[FeatureRegressor],
    normalizers: Sequence[Normalizer],
    cal: TabularDataset,
    alpha: float,
    ranges: np.ndarray,
) -> ConformalModel:
    """Compute per-feature critical scores on the calibration split."""
    if cal.n_rows == 0:
        raise DataError("empty calibration set")
    scores = calibration_scores(representer, regressors, normalizers, cal)
    eps = np.array([critical_score(scores[:, j], alpha) for j in range(scores.shape[1])])
    flags = []
    if not np.all(np.isfinite(eps)):
        warnings.warn(
            f"calibration set of {cal.n_rows} rows is too small for alpha={alpha}; intervals are unbounded"
        )
        flags.append("eps_infinite")
    flags += [f"constant_normalizer:{n.name}" for n in normalizers if n.constant]
    return ConformalModel(
        representer,
        tuple(regressors),
        tuple(normalizers),
        eps,
        float(alpha),
        np.asarray(ranges, dtype=float),
        cal.n_rows,
        tuple(flags),
    )


def fit_conformal(
    proper: TabularDataset,
    cal: TabularDataset,
    representer: Representer,
    ranges: np.ndarray,
    alpha: float = 0.05,
    normalizer: str = NORMALIZER_KNN,
    normalizer_input: str = INPUT_FEATURES,
    floor_fraction: float = FLOOR_FRACTION,
    log_guard: float = LOG_GUARD,
) -> ConformalModel:
    """Fit regressors and normalizers on ``proper`` and calibrate on ``cal``."""
    z = representer.standardized(proper)
    h = z @ representer.components
    regressors = fit_feature_regressors(h, proper)
    inputs = z if normalizer_input == INPUT_FEATURES else None
    if normalizer_input not in (INPUT_FEATURES, INPUT_LATENT):
        raise ValueError(f"unknown normalizer input {normalizer_input!r}")
    normalizers = fit_normalizers(
        h, proper, regressors, ranges, kind=normalizer, inputs=inputs,
        floor_fraction=floor_fraction, log_guard=log_guard,
    )
    return calibrate(representer, regressors, normalizers, cal, alpha, ranges)


def predict_intervals(model: ConformalModel, ds: TabularDataset, observed: bool = True) -> IntervalSet:
    """Intervals for every row and feature of ``ds``."""
    z = model.representer.standardized(ds)
    h = z @ model.representer.components
    center = np.column_stack([r.predict(h) for r in model.regressors])
    scale = np.column_stack(
        [n.sigma(_normalizer_inputs(n, h, z)) for n in model.normalizers]
    )
    return IntervalSet(
        model.names,
        center,
        scale,
        model.eps.copy(),
        model.ranges,
        ds.values.copy() if observed else None,
    )
