"""Copula-based generator for augmenting the training set."""
from __future__ import annotations

import numpy as np

from ..data import TabularDataset
from .bicop import FAMILIES, PairCopula, fit_pair_copula
from .marginal import EmpiricalMarginal, fit_marginal
from .vine import VineModel, fit_dvine, sample_dvine, vine_loglik

AUGMENT_UNION = "union"
AUGMENT_SYNTHETIC = "synthetic"

__all__ = [
    "FAMILIES",
    "EmpiricalMarginal",
    "PairCopula",
    "VineModel",
    "augment",
    "fit_dvine",
    "fit_marginal",
    "fit_pair_copula",
    "sample_dvine",
    "vine_loglik",
]


def augment(
    train: TabularDataset,
    model: VineModel,
    seed: int,
    n_samples: int | None = None,
    mode: str = AUGMENT_UNION,
) -> TabularDataset:
    """Build the augmented training set from vine samples.

    ``n_samples`` defaults to ``len(train)``. In ``"union"`` mode the samples
    are appended to ``train``; ``"synthetic"`` returns the samples alone.
    """
    n = train.n_rows if n_samples is None else n_samples
    samples = sample_dvine(model, n, seed)
    samples = samples.select(train.names) if samples.names != train.names else samples
    if mode == AUGMENT_SYNTHETIC:
        return train.with_values(samples.values, name=f"{train.name}+synthetic")
    if mode != AUGMENT_UNION:
        raise ValueError(f"unknown augmentation mode {mode!r}")
    return train.with_values(np.vstack([train.values, samples.values]), name=f"{train.name}+copula")
