"""Bagged Gini-tree classifier and accuracy on certain/uncertain groups."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from sklearn.tree import DecisionTreeClassifier

from .data import TabularDataset
from .errors import DataError
from .stratify import PROPORTIONS, StratificationReport, group_size

DEFAULT_TREES = 100


def _matrix(X) -> np.ndarray:
    return X.values if isinstance(X, TabularDataset) else np.asarray(X, dtype=float)


@dataclass(frozen=True, eq=False)
class TreeEnsembleClassifier:
    """Majority vote over trees grown on bootstrap samples.

    Vote ties go to the lower class (classes are kept sorted).
    """

    classes: np.ndarray
    trees: tuple[DecisionTreeClassifier, ...]
    max_features: int
    oob_accuracy: float
    seed: int

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def votes(self, X) -> np.ndarray:
        X = _matrix(X)
        counts = np.zeros((X.shape[0], self.classes.size), dtype=np.int64)
        rows = np.arange(X.shape[0])
        for tree in self.trees:
            # trees are trained on class codes, so predictions index ``classes``
            counts[rows, tree.predict(X).astype(int)] += 1
        return counts

    def predict(self, X) -> np.ndarray:
        return self.classes[np.argmax(self.votes(X), axis=1)]

    def accuracy(self, X, y) -> float:
        y = np.asarray(y)
        if y.size == 0:
            raise DataError("accuracy of an empty set is undefined")
        return float(np.mean(self.predict(X) == y))


def fit_classifier(
    X,
    y,
    seed: int,
    n_trees: int = DEFAULT_TREES,
    max_features: int | None = None,
) -> TreeEnsembleClassifier:
    """Grow ``n_trees`` Gini trees, each on a bootstrap sample with
    ``ceil(sqrt(d))`` candidate features per split."""
    X = _matrix(X)
    y = np.asarray(y)
    if X.shape[0] != y.size:
        raise DataError(f"{X.shape[0]} rows but {y.size} labels")
    classes, codes = np.unique(y, return_inverse=True)
    if classes.size < 2:
        raise DataError("labels contain a single class")
    if n_trees < 1:
        raise ValueError("n_trees must be positive")
    n, d = X.shape
    mtry = max_features or int(math.ceil(math.sqrt(d)))
    rng = np.random.default_rng(seed)
    trees = []
    oob_votes = np.zeros((n, classes.size), dtype=np.int64)
    for _ in range(n_trees):
        boot = rng.integers(0, n, n)
        tree = DecisionTreeClassifier(
            criterion="gini", max_features=mtry, random_state=int(rng.integers(2**31 - 1))
        )
        tree.fit(X[boot], codes[boot])
        oob = np.ones(n, dtype=bool)
        oob[boot] = False
        if oob.any():
            oob_votes[np.flatnonzero(oob), tree.predict(X[oob]).astype(int)] += 1
        trees.append(tree)
    seen = oob_votes.sum(axis=1) > 0
    oob_acc = float(np.mean(np.argmax(oob_votes[seen], axis=1) == codes[seen])) if seen.any() else math.nan
    return TreeEnsembleClassifier(classes, tuple(trees), mtry, oob_acc, seed)


def accuracy_function(clf: TreeEnsembleClassifier, X, y) -> Callable[[np.ndarray], float]:
    """Accuracy on any subset of rows, predicting once up front."""
    correct = clf.predict(X) == np.asarray(y)

    def acc(idx) -> float:
        idx = np.asarray(idx, dtype=int)
        if idx.size == 0:
            raise DataError("accuracy of an empty set is undefined")
        return float(correct[idx].mean())

    return acc


@dataclass(frozen=True)
class GroupAccuracy:
    p: float
    size: int
    certain: float
    uncertain: float
    random: float


@dataclass(frozen=True)
class StratifiedAccuracy:
    baseline: float
    rows: tuple[GroupAccuracy, ...]
    skipped: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {
            "baseline": self.baseline,
            "curve": [r.__dict__ for r in self.rows],
            "skipped": list(self.skipped),
        }

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["p", "size", "acc_certain", "acc_uncertain", "acc_random", "acc_baseline"])
            for r in self.rows:
                w.writerow([r.p, r.size, repr(r.certain), repr(r.uncertain), repr(r.random), repr(self.baseline)])


def evaluate_stratification(
    clf: TreeEnsembleClassifier,
    test,
    labels,
    report: StratificationReport,
    proportions: Sequence[float] = PROPORTIONS,
    seed: int = 0,
) -> StratifiedAccuracy:
    """Accuracy on Cert_p, Uncert_p and an equal-size random subset for each p."""
    X = _matrix(test)
    if X.shape[0] != report.n:
        raise DataError(f"report covers {report.n} instances, test set has {X.shape[0]}")
    acc = accuracy_function(clf, X, labels)
    rng = np.random.default_rng(seed)
    rows, skipped = [], []
    for p in proportions:
        m = group_size(report.n, p)
        if m < 1:
            skipped.append(float(p))
            continue
        cert, uncert = report.groups(p)
        control = rng.choice(report.n, size=m, replace=False)
        rows.append(GroupAccuracy(float(p), m, acc(cert), acc(uncert), acc(control)))
    return StratifiedAccuracy(acc(np.arange(report.n)), tuple(rows), tuple(skipped))
