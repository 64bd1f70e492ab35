"""Conformal per-feature intervals for finding incongruous tabular data."""
from .conformal import ConformalModel, critical_score, fit_conformal, predict_intervals
from .data import TabularDataset, from_array, load_csv
from .errors import DataError, NumericalError
from .intervals import IntervalSet
from .metrics import interval_quality, mpi
from .pipeline import DataSuite, PipelineConfig, fit_suite, prepare
from .stratify import StratificationReport, build_report

__version__ = "0.1.0"

__all__ = [
    "ConformalModel",
    "DataError",
    "DataSuite",
    "IntervalSet",
    "NumericalError",
    "PipelineConfig",
    "StratificationReport",
    "TabularDataset",
    "build_report",
    "critical_score",
    "fit_conformal",
    "fit_suite",
    "from_array",
    "interval_quality",
    "load_csv",
    "mpi",
    "predict_intervals",
    "prepare",
]
