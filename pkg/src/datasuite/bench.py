"""Experiment drivers shared by the CLI, the scripts and the acceptance tests."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .data import TabularDataset
from .downstream import accuracy_function, evaluate_stratification, fit_classifier
from .metrics import interval_quality, mpi
from .pipeline import DataSuite, PipelineConfig, fit_suite
from .stratify import lambda_sweep
from .synth import SynthConfig, fit_linear, make_experiment

CERTAIN_TOP = 100
BASELINE_HOLDOUT = 0.2
SWEEP_LAMBDAS = tuple(round(0.1 * k, 1) for k in range(11))


@dataclass(frozen=True)
class SynthBenchResult:
    """Downstream regression MSE on the groups of one perturbed test set.

    The regression target is always the clean (unperturbed) last feature.
    """

    config: SynthConfig
    baseline_mse: float
    test_mse: float
    certain_mse: float
    inconsistent_mse: float
    n_inconsistent: int
    coverage_clean: float
    coverage_all: float
    delta_perturbed: float
    delta_clean: float
    certain_precision: float

    @property
    def delta_margin(self) -> float:
        return self.delta_perturbed - self.delta_clean

    def to_dict(self) -> dict:
        out = {k: v for k, v in self.__dict__.items() if k != "config"}
        out["synth"] = self.config.__dict__ | {"mean": list(self.config.mean), "cov": [list(r) for r in self.config.cov]}
        out["delta_margin"] = self.delta_margin
        return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in out.items()}


def synth_bench(
    synth: SynthConfig,
    pipeline: PipelineConfig = PipelineConfig(),
    top: int = CERTAIN_TOP,
) -> SynthBenchResult:
    """Generate, perturb, fit the pipeline on clean train data and score groups."""
    exp = make_experiment(synth)
    suite = fit_suite(exp.train, replace(pipeline, seed=synth.seed))
    iv, report = suite.stratify(exp.test)

    rng = np.random.default_rng([synth.seed, 2])
    perm = rng.permutation(exp.train.n_rows)
    n_hold = int(round(BASELINE_HOLDOUT * exp.train.n_rows))
    hold, fit_rows = perm[:n_hold], perm[n_hold:]
    train_vals = exp.train.values
    ols = fit_linear(train_vals[fit_rows, :-1], train_vals[fit_rows, -1])

    def mse(values, target) -> float:
        if values.shape[0] == 0:
            return math.nan
        return float(np.mean((ols.predict(values[:, :-1]) - target) ** 2))

    clean_y = exp.test_clean.values[:, -1]
    test_vals = exp.test.values
    cert = report.order[:top]
    flagged = np.flatnonzero(report.inconsistent)
    inside = iv.contains()
    mask = exp.mask
    return SynthBenchResult(
        config=synth,
        baseline_mse=mse(train_vals[hold], train_vals[hold, -1]),
        test_mse=mse(test_vals, clean_y),
        certain_mse=mse(test_vals[cert], clean_y[cert]),
        inconsistent_mse=mse(test_vals[flagged], clean_y[flagged]),
        n_inconsistent=int(flagged.size),
        coverage_clean=float(inside[~mask].mean()) if (~mask).any() else math.nan,
        coverage_all=interval_quality(iv).coverage,
        delta_perturbed=float(report.delta[mask].mean()) if mask.any() else math.nan,
        delta_clean=float(report.delta[~mask].mean()) if (~mask).any() else math.nan,
        certain_precision=float(np.mean(~mask[cert])),
    )


def synth_lambda_sweep(
    synth: SynthConfig,
    pipeline: PipelineConfig = PipelineConfig(),
    lambdas: Sequence[float] = SWEEP_LAMBDAS,
) -> list[dict]:
    """Flag counts per lambda, scored by the fraction of flagged rows that were perturbed."""
    exp = make_experiment(synth)
    suite = fit_suite(exp.train, replace(pipeline, seed=synth.seed))
    _, report = suite.stratify(exp.test)
    return lambda_sweep(report.nu, lambdas, score=lambda idx: float(exp.mask[idx].mean()))


@dataclass(frozen=True, eq=False)
class ClassificationRun:
    suite: DataSuite
    mpi: object
    curve: object
    oob_accuracy: float
    report: object


def classification_mpi(
    train: TabularDataset,
    y_train,
    test: TabularDataset,
    y_test,
    pipeline: PipelineConfig = PipelineConfig(),
    n_trees: int = 100,
) -> ClassificationRun:
    """Fit the pipeline and a tree ensemble on ``train``, then compute MPI on ``test``."""
    suite = fit_suite(train, pipeline)
    _, report = suite.stratify(test)
    clf = fit_classifier(train, y_train, seed=pipeline.seed, n_trees=n_trees)
    result = mpi(accuracy_function(clf, test, y_test), report)
    curve = evaluate_stratification(clf, test, y_test, report, seed=pipeline.seed)
    return ClassificationRun(suite, result, curve, clf.oob_accuracy, report)
