"""Linear latent representation: standardization followed by PCA."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .data import StandardizationParams, TabularDataset, standardize
from .errors import DataError


@dataclass(frozen=True, eq=False)
class Representer:
    """Standardization parameters plus a principal-component basis.

    ``basis`` keeps every component (``d_X`` columns, descending explained
    variance); only the first ``n_components`` define the latent space.
    """

    params: StandardizationParams
    basis: np.ndarray
    explained_variance: np.ndarray
    n_components: int

    @property
    def names(self) -> tuple[str, ...]:
        return self.params.names

    @property
    def components(self) -> np.ndarray:
        return self.basis[:, : self.n_components]

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        total = self.explained_variance.sum()
        return self.explained_variance / total if total > 0 else self.explained_variance

    def standardized(self, ds: TabularDataset | np.ndarray) -> np.ndarray:
        return self.params.apply(self._values(ds))

    def transform(self, ds: TabularDataset | np.ndarray) -> np.ndarray:
        return self.standardized(ds) @ self.components

    def reconstruct(self, latents: np.ndarray) -> np.ndarray:
        """Map latents back to standardized feature space."""
        return np.asarray(latents) @ self.components.T

    def with_components(self, k: int) -> "Representer":
        if not 1 <= k <= self.basis.shape[1]:
            raise ValueError(f"k must be in [1, {self.basis.shape[1]}]")
        return Representer(self.params, self.basis, self.explained_variance, k)

    def _values(self, ds) -> np.ndarray:
        if isinstance(ds, TabularDataset):
            if ds.names != self.names:
                raise DataError(f"schema mismatch: expected {list(self.names)}, got {list(ds.names)}")
            return ds.values
        values = np.asarray(ds, dtype=float)
        if values.ndim != 2 or values.shape[1] != len(self.names):
            raise DataError(f"expected {len(self.names)} columns, got shape {values.shape}")
        return values

    def to_dict(self) -> dict:
        return {
            "standardization": self.params.to_dict(),
            "basis": self.basis.tolist(),
            "explained_variance": self.explained_variance.tolist(),
            "n_components": self.n_components,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Representer":
        return cls(
            StandardizationParams.from_dict(d["standardization"]),
            np.asarray(d["basis"], dtype=float),
            np.asarray(d["explained_variance"], dtype=float),
            int(d["n_components"]),
        )


def default_latent_dim(d: int) -> int:
    return max(1, d // 2)


def fit_representer(ds: TabularDataset, n_components: int | None = None) -> Representer:
    """Standardize ``ds`` and keep its top principal components.

    Components come from the SVD of the standardized matrix. Each is signed so
    that its largest-magnitude loading is positive. Defaults to half the
    feature count, rounded down, with a minimum of 1.
    """
    if ds.n_rows <= ds.n_features:
        raise DataError(f"need more rows than features, got {ds.n_rows}x{ds.n_features}")
    z_ds, params = standardize(ds)
    z = z_ds.values
    if params.dropped:
        raise DataError(f"representer input has zero-variance features {list(params.dropped)}")
    d = z.shape[1]
    k = default_latent_dim(d) if n_components is None else int(n_components)
    if not 1 <= k <= d:
        raise ValueError(f"n_components must be in [1, {d}]")
    _, sv, vt = np.linalg.svd(z - z.mean(axis=0), full_matrices=False)
    basis = vt.T.copy()
    for j in range(basis.shape[1]):
        if basis[np.argmax(np.abs(basis[:, j])), j] < 0:
            basis[:, j] *= -1.0
    variance = sv**2 / (z.shape[0] - 1)
    rank = int(np.sum(sv > sv[0] * max(z.shape) * np.finfo(float).eps)) if sv[0] > 0 else 0
    if rank < k:
        warnings.warn(f"rank-deficient input (rank {rank}); keeping {max(rank, 1)} components")
        k = max(rank, 1)
    return Representer(params, basis, variance, k)


def transform(rep: Representer, ds: TabularDataset | np.ndarray) -> np.ndarray:
    return rep.transform(ds)
