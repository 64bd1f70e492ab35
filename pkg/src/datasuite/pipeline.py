"""End-to-end fitting: copula augmentation, representer, conformal calibration."""
from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import conformal as cp
from .conformal import ConformalModel, fit_conformal, predict_intervals
from .data import (
    CATEGORICAL,
    EncodingReport,
    SplitSpec,
    TabularDataset,
    drop_constant_features,
    encode_onehot,
    feature_ranges,
    split_proper_calibration,
)
from .errors import DataError
from .generator import AUGMENT_SYNTHETIC, AUGMENT_UNION, VineModel, augment, fit_dvine
from .generator.vine import ORDER_GIVEN, ORDER_MAX_TAU
from .intervals import IntervalSet
from .representer import fit_representer
from .stratify import DEFAULT_LAMBDA, StratificationReport, build_report

AUGMENT_NONE = "none"
REPRESENTER_AUGMENTED = "augmented"
REPRESENTER_TRAIN = "train"


@dataclass(frozen=True)
class PipelineConfig:
    alpha: float = 0.05
    lam: float = DEFAULT_LAMBDA
    proper_fraction: float = 2.0 / 3.0
    truncation: int | None = None
    augmentation: str = AUGMENT_UNION
    n_samples: int | None = None
    vine_order: str = ORDER_GIVEN
    representer_on: str = REPRESENTER_AUGMENTED
    n_components: int | None = None
    normalizer: str = cp.NORMALIZER_KNN
    normalizer_input: str = cp.INPUT_FEATURES
    floor_fraction: float = cp.FLOOR_FRACTION
    log_guard: float = cp.LOG_GUARD
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must be in [0, 1], got {self.lam}")
        if not 0.0 < self.proper_fraction < 1.0:
            raise ValueError(f"proper_fraction must be in (0, 1), got {self.proper_fraction}")
        checks = {
            "augmentation": (AUGMENT_UNION, AUGMENT_SYNTHETIC, AUGMENT_NONE),
            "vine_order": (ORDER_GIVEN, ORDER_MAX_TAU),
            "representer_on": (REPRESENTER_AUGMENTED, REPRESENTER_TRAIN),
            "normalizer": (cp.NORMALIZER_KNN, cp.NORMALIZER_TREE),
            "normalizer_input": (cp.INPUT_FEATURES, cp.INPUT_LATENT),
        }
        for key, allowed in checks.items():
            if getattr(self, key) not in allowed:
                raise ValueError(f"{key} must be one of {allowed}, got {getattr(self, key)!r}")
        if self.floor_fraction <= 0 or self.log_guard <= 0:
            raise ValueError("floor_fraction and log_guard must be positive")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ValueError(f"seed must be an integer, got {self.seed!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**dict(d))

    def hash(self) -> str:
        return config_hash(self.to_dict())


def config_hash(d: Mapping[str, Any]) -> str:
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _sub_seeds(seed: int) -> tuple[int, int]:
    sampling, split = np.random.SeedSequence(seed).generate_state(2)
    return int(sampling), int(split)


@dataclass(frozen=True, eq=False)
class DataSuite:
    """A fitted pipeline: optional vine generator plus the conformal model."""

    config: PipelineConfig
    conformal: ConformalModel
    vine: VineModel | None = None

    @property
    def names(self) -> tuple[str, ...]:
        return self.conformal.names

    @property
    def ranges(self) -> np.ndarray:
        return self.conformal.ranges

    def intervals(self, ds: TabularDataset, observed: bool = True) -> IntervalSet:
        if ds.names != self.names:
            raise DataError(f"test schema {list(ds.names)} differs from training schema {list(self.names)}")
        return predict_intervals(self.conformal, ds, observed=observed)

    def stratify(self, ds: TabularDataset, lam: float | None = None) -> tuple[IntervalSet, StratificationReport]:
        iv = self.intervals(ds)
        return iv, build_report(iv, self.config.lam if lam is None else lam)

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "config_hash": self.config.hash(),
            "seed": self.config.seed,
            "conformal": self.conformal.to_dict(),
            "vine": None if self.vine is None else self.vine.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "DataSuite":
        return cls(
            PipelineConfig.from_dict(d["config"]),
            ConformalModel.from_dict(d["conformal"]),
            None if d.get("vine") is None else VineModel.from_dict(d["vine"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "DataSuite":
        return cls.from_dict(json.loads(Path(path).read_text()))


def fit_suite(train: TabularDataset, config: PipelineConfig = PipelineConfig()) -> DataSuite:
    """Fit the whole pipeline on an already encoded training set.

    Ranges come from the original training rows. The vine is fit on ``train``,
    its samples form the augmented set, which is split into proper-training
    and calibration parts.
    """
    if train.n_rows < 4:
        raise DataError(f"need at least 4 training rows, got {train.n_rows}")
    ranges = feature_ranges(train)
    if np.any(ranges[:, 1] <= ranges[:, 0]):
        bad = [n for n, (a, b) in zip(train.names, ranges) if b <= a]
        raise DataError(f"constant features must be dropped before fitting: {bad}")
    sample_seed, split_seed = _sub_seeds(config.seed)

    vine = None
    data = train
    if config.augmentation != AUGMENT_NONE:
        if train.n_features < 2:
            warnings.warn("a single feature cannot be modelled by a vine; skipping augmentation")
        else:
            vine = fit_dvine(train, truncation=config.truncation, order=config.vine_order)
            data = augment(train, vine, sample_seed, config.n_samples, config.augmentation)

    proper, cal = split_proper_calibration(data, SplitSpec(config.proper_fraction, split_seed))
    rep_data = data if config.representer_on == REPRESENTER_AUGMENTED else train
    rep = fit_representer(rep_data, config.n_components)
    model = fit_conformal(
        proper,
        cal,
        rep,
        ranges,
        alpha=config.alpha,
        normalizer=config.normalizer,
        normalizer_input=config.normalizer_input,
        floor_fraction=config.floor_fraction,
        log_guard=config.log_guard,
    )
    return DataSuite(config, model, vine)


@dataclass(frozen=True, eq=False)
class PreparedData:
    train: TabularDataset
    test: TabularDataset | None
    y_train: np.ndarray | None
    y_test: np.ndarray | None
    encoding: EncodingReport
    dropped: tuple[str, ...]


def label_values(ds: TabularDataset, label: str) -> np.ndarray:
    """Label column as numbers, or as level strings when it is categorical."""
    col = ds.columns[ds.names.index(label)]
    if col.kind == CATEGORICAL:
        return np.array([col.levels[int(c)] for c in ds.column(label)], dtype=object)
    return ds.column(label).copy()


def _split_label(ds: TabularDataset, label: str | None):
    if label is None:
        return ds, None
    if label not in ds.names:
        raise DataError(f"label column {label!r} not found")
    return ds.drop([label]), label_values(ds, label)


def prepare(
    train: TabularDataset,
    test: TabularDataset | None = None,
    label: str | None = None,
) -> PreparedData:
    """Separate the label, one-hot encode categoricals and drop constant features.

    Encoding levels and dropped columns are decided on ``train`` only.
    """
    train, y_train = _split_label(train, label)
    y_test = None
    train, report = encode_onehot(train)
    train, dropped = drop_constant_features(train)
    if test is not None:
        test, y_test = _split_label(test, label)
        test, test_report = encode_onehot(test, report.levels)
        report = replace(report, unseen=test_report.unseen)
        test = test.drop(dropped) if dropped else test
        if test.names != train.names:
            raise DataError(f"test schema {list(test.names)} differs from training schema {list(train.names)}")
    return PreparedData(train, test, y_train, y_test, report, tuple(dropped))
