"""Command-line interface.

Every subcommand takes an optional JSON ``--config`` file whose keys are the
long option names (dashes or underscores); flags given on the command line
override it. ``--seed`` is mandatory, from either source.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import traceback
from dataclasses import fields
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .bench import SWEEP_LAMBDAS, synth_bench, synth_lambda_sweep
from .data import encode_onehot, load_csv
from .downstream import accuracy_function, evaluate_stratification, fit_classifier
from .errors import DataError, NumericalError
from .metrics import interval_quality, mpi
from .pipeline import DataSuite, PipelineConfig, config_hash, fit_suite, label_values, prepare
from .stratify import lambda_sweep, project_2d, projection_to_csv
from .synth import NAMED_CONFIGS, get_config

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3
PIPELINE_KEYS = {f.name for f in fields(PipelineConfig)}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# ---------------------------------------------------------------- artifacts

def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, fixed indentation, non-finite floats as null."""
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


class Artifacts:
    """Tracks files written by a command so a failure can remove them."""

    def __init__(self, out: Path, stamp: dict):
        self.out = out
        self.stamp = stamp
        self.written: list[Path] = []

    def path(self, name: str) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        p = self.out / name
        self.written.append(p)
        return p

    def json(self, name: str, payload: dict) -> Path:
        p = self.path(name)
        p.write_text(dumps({**self.stamp, **payload}), encoding="utf-8")
        return p

    def rollback(self) -> None:
        for p in self.written:
            p.unlink(missing_ok=True)


# ---------------------------------------------------------------- config

def _resolve(args: argparse.Namespace, defaults: dict[str, Any]) -> dict[str, Any]:
    """Merge defaults < config file < explicitly given flags."""
    resolved = dict(defaults)
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(raw, dict):
            raise UsageError("config file must hold a JSON object")
        for key, value in raw.items():
            key = key.replace("-", "_")
            if key not in defaults:
                raise UsageError(f"unknown config key {key!r}")
            resolved[key] = value
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            resolved[key] = value
    if resolved.get("seed") is None:
        raise UsageError("a seed is required (--seed or \"seed\" in the config file)")
    if not isinstance(resolved["seed"], int) or isinstance(resolved["seed"], bool):
        raise UsageError(f"seed must be an integer, got {resolved['seed']!r}")
    return resolved


def _pipeline_config(opts: dict[str, Any]) -> PipelineConfig:
    try:
        return PipelineConfig(**{k: v for k, v in opts.items() if k in PIPELINE_KEYS})
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _require(opts: dict[str, Any], *keys: str) -> None:
    missing = [k for k in keys if opts.get(k) in (None, "")]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _stamp(opts: dict[str, Any], command: str) -> dict:
    # the output location does not influence results, so it stays out of the hash
    resolved = {k: v for k, v in sorted(opts.items()) if k not in ("config", "out")}
    return {
        "command": command,
        "config": resolved,
        "config_hash": config_hash({"command": command, **resolved}),
        "seed": opts["seed"],
        "version": __version__,
    }


# ---------------------------------------------------------------- model file

def _load_model(path: str) -> tuple[DataSuite, dict]:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return DataSuite.from_dict(payload["suite"]), payload["preprocessing"]
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise DataError(f"cannot load model {path}: {exc}") from exc


def _header(path: str) -> list[str]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return [h.strip() for h in next(csv.reader(fh), [])]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def _load_like_training(path: str, prep: dict):
    """Load a CSV and apply the training-time label split, encoding and column drops."""
    header = _header(path)
    # only constrain columns present in this file (a test file may lack the label)
    raw = load_csv(path, schema={k: v for k, v in prep["raw_schema"].items() if k in header})
    label = prep["label"]
    y = None
    if label is not None and label in raw.names:
        y = label_values(raw, label)
        raw = raw.drop([label])
    ds, _ = encode_onehot(raw, prep["levels"])
    dropped = [n for n in prep["dropped"] if n in ds.names]
    ds = ds.drop(dropped) if dropped else ds
    if list(ds.names) != list(prep["features"]):
        raise DataError(f"schema {list(ds.names)} differs from training schema {prep['features']}")
    return ds, y


def _labels_as_str(y) -> list[str]:
    return [str(v) for v in y]


# ---------------------------------------------------------------- commands

def cmd_fit(opts, art: Artifacts) -> None:
    _require(opts, "train", "out")
    cfg = _pipeline_config(opts)
    raw = load_csv(opts["train"])
    label = opts.get("label")
    data = prepare(raw, label=label)
    suite = fit_suite(data.train, cfg)
    preprocessing = {
        "label": label,
        "raw_schema": {c.name: c.kind for c in raw.columns},
        "levels": {k: list(v) for k, v in data.encoding.levels.items()},
        "dropped": list(data.dropped),
        "features": list(data.train.names),
    }
    art.json("model.json", {"suite": suite.to_dict(), "preprocessing": preprocessing})
    art.json(
        "fit_report.json",
        {
            "n_train": data.train.n_rows,
            "features": list(data.train.names),
            "dropped_constant": list(data.dropped),
            "eps": suite.conformal.eps,
            "flags": list(suite.conformal.flags),
            "n_calibration": suite.conformal.n_calibration,
            "latent_dim": suite.conformal.representer.n_components,
            "n_pair_copulas": None if suite.vine is None else suite.vine.n_pair_copulas,
        },
    )


def cmd_intervals(opts, art: Artifacts) -> None:
    _require(opts, "model", "test", "out")
    suite, prep = _load_model(opts["model"])
    test, _ = _load_like_training(opts["test"], prep)
    iv = suite.intervals(test)
    iv.to_csv(art.path("intervals.csv"))


def cmd_stratify(opts, art: Artifacts) -> None:
    _require(opts, "model", "test", "out")
    suite, prep = _load_model(opts["model"])
    test, _ = _load_like_training(opts["test"], prep)
    lam = opts.get("lam")
    _, report = suite.stratify(test, lam)
    art.json("stratification.json", report.to_dict())
    report.ranking_to_csv(art.path("ranking.csv"))
    if len(suite.names) >= 2:
        labels = report.labels(opts["proportion"])
        labels = np.where(report.inconsistent, "inconsistent", labels)
        coords, labels = project_2d(suite.conformal.representer, test, labels)
        projection_to_csv(art.path("projection.csv"), coords, labels)


def cmd_metrics(opts, art: Artifacts) -> None:
    _require(opts, "model", "test", "out")
    suite, prep = _load_model(opts["model"])
    test, y_test = _load_like_training(opts["test"], prep)
    iv, report = suite.stratify(test, opts.get("lam"))
    payload: dict[str, Any] = {"interval_quality": interval_quality(iv).to_dict()}
    if opts.get("train") and y_test is not None:
        train, y_train = _load_like_training(opts["train"], prep)
        clf = fit_classifier(train, _labels_as_str(y_train), seed=opts["seed"], n_trees=opts["n_trees"])
        y = _labels_as_str(y_test)
        result = mpi(accuracy_function(clf, test, y), report)
        curve = evaluate_stratification(clf, test, y, report, seed=opts["seed"])
        payload["mpi"] = result.to_dict()
        payload["accuracy"] = curve.to_dict()
        payload["oob_accuracy"] = clf.oob_accuracy
        curve.to_csv(art.path("accuracy_curve.csv"))
    art.json("metrics.json", payload)


def cmd_run(opts, art: Artifacts) -> None:
    """fit + intervals + stratify + metrics in one go."""
    _require(opts, "train", "test", "out")
    cmd_fit(opts, art)
    opts = {**opts, "model": str(art.out / "model.json")}
    cmd_intervals(opts, art)
    cmd_stratify(opts, art)
    cmd_metrics(opts, art)


def cmd_synth_bench(opts, art: Artifacts) -> None:
    _require(opts, "synth", "out")
    names = sorted(NAMED_CONFIGS) if opts["synth"] == "all" else [opts["synth"]]
    cfg = _pipeline_config(opts)
    results = {}
    for name in names:
        try:
            base = get_config(name)
        except KeyError as exc:
            raise UsageError(str(exc.args[0])) from exc
        runs = [synth_bench(base.with_seed(opts["seed"] + k), cfg).to_dict() for k in range(opts["repeats"])]
        keys = ("baseline_mse", "test_mse", "certain_mse", "inconsistent_mse", "coverage_clean", "delta_margin")
        summary = {}
        for key in keys:
            vals = np.array([np.nan if r[key] is None else r[key] for r in runs], dtype=float)
            summary[key] = {"mean": float(np.nanmean(vals)), "sd": float(np.nanstd(vals))}
        results[name] = {"runs": runs, "summary": summary}
    art.json("synth_bench.json", {"results": results})


def cmd_lambda_sweep(opts, art: Artifacts) -> None:
    _require(opts, "out")
    lambdas = SWEEP_LAMBDAS
    if opts.get("synth"):
        try:
            synth = get_config(opts["synth"], opts["seed"])
        except KeyError as exc:
            raise UsageError(str(exc.args[0])) from exc
        rows = synth_lambda_sweep(synth, _pipeline_config(opts), lambdas)
        score_name = "perturbed_fraction"
    else:
        _require(opts, "model", "test", "train")
        suite, prep = _load_model(opts["model"])
        test, y_test = _load_like_training(opts["test"], prep)
        if y_test is None:
            raise UsageError("lambda-sweep on data needs labelled test rows (fit with --label)")
        train, y_train = _load_like_training(opts["train"], prep)
        clf = fit_classifier(train, _labels_as_str(y_train), seed=opts["seed"], n_trees=opts["n_trees"])
        _, report = suite.stratify(test)
        rows = lambda_sweep(report.nu, lambdas, score=accuracy_function(clf, test, _labels_as_str(y_test)))
        score_name = "accuracy"
    with open(art.path("lambda_sweep.csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write(f"lambda,flagged,{score_name}\n")
        for r in rows:
            score = "" if r["score"] is None else repr(float(r["score"]))
            fh.write(f"{r['lambda']},{r['flagged']},{score}\n")
    art.json("lambda_sweep.json", {"score": score_name, "rows": rows})


COMMANDS = {
    "fit": cmd_fit,
    "intervals": cmd_intervals,
    "stratify": cmd_stratify,
    "metrics": cmd_metrics,
    "run": cmd_run,
    "synth-bench": cmd_synth_bench,
    "lambda-sweep": cmd_lambda_sweep,
}

# option name -> (argparse kwargs, default)
_OPTIONS: dict[str, tuple[dict, Any]] = {
    "seed": ({"type": int}, None),
    "out": ({"help": "output directory"}, None),
    "train": ({"help": "training CSV"}, None),
    "test": ({"help": "test CSV"}, None),
    "model": ({"help": "model.json written by fit"}, None),
    "label": ({"help": "label column, excluded from the features"}, None),
    "synth": ({"help": f"synthetic config: {', '.join(sorted(NAMED_CONFIGS))} or all"}, None),
    "repeats": ({"type": int, "help": "number of consecutive seeds"}, 1),
    "proportion": ({"type": float, "help": "group proportion for the projection labels"}, 0.1),
    "n_trees": ({"type": int}, 100),
    "alpha": ({"type": float}, PipelineConfig.alpha),
    "lam": ({"type": float, "help": "inconsistency threshold lambda"}, PipelineConfig.lam),
    "proper_fraction": ({"type": float}, PipelineConfig.proper_fraction),
    "truncation": ({"type": int}, PipelineConfig.truncation),
    "augmentation": ({"choices": ["union", "synthetic", "none"]}, PipelineConfig.augmentation),
    "n_samples": ({"type": int}, PipelineConfig.n_samples),
    "vine_order": ({"choices": ["given", "max_tau"]}, PipelineConfig.vine_order),
    "representer_on": ({"choices": ["augmented", "train"]}, PipelineConfig.representer_on),
    "n_components": ({"type": int}, PipelineConfig.n_components),
    "normalizer": ({"choices": ["knn", "tree"]}, PipelineConfig.normalizer),
    "normalizer_input": ({"choices": ["features", "latent"]}, PipelineConfig.normalizer_input),
    "floor_fraction": ({"type": float}, PipelineConfig.floor_fraction),
    "log_guard": ({"type": float}, PipelineConfig.log_guard),
}

_COMMAND_OPTIONS = {
    "fit": ["train", "label"],
    "intervals": ["model", "test"],
    "stratify": ["model", "test", "lam", "proportion"],
    "metrics": ["model", "test", "train", "lam", "n_trees"],
    "run": ["train", "test", "label", "proportion", "n_trees"],
    "synth-bench": ["synth", "repeats"],
    "lambda-sweep": ["synth", "model", "test", "train", "n_trees"],
}
_PIPELINE_COMMANDS = {"fit", "run", "synth-bench", "lambda-sweep"}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="datasuite", description="Conformal feature intervals and data stratification.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name, help=(COMMANDS[name].__doc__ or "").strip() or None)
        p.add_argument("--config", help="JSON config file")
        keys = ["seed", "out", *_COMMAND_OPTIONS[name]]
        if name in _PIPELINE_COMMANDS:
            keys += [k for k in _OPTIONS if k in PIPELINE_KEYS and k not in keys]
        for key in keys:
            kwargs = dict(_OPTIONS[key][0])
            p.add_argument("--" + key.replace("_", "-"), dest=key, default=None, **kwargs)
        p.set_defaults(_keys=keys)
    return parser


def _module_tag(exc: BaseException) -> str:
    tag = "datasuite"
    for frame in traceback.extract_tb(exc.__traceback__):
        parts = Path(frame.filename).parts
        if "datasuite" in parts:
            idx = len(parts) - 1 - parts[::-1].index("datasuite")
            tag = ".".join(parts[idx:])[: -len(".py")] if frame.filename.endswith(".py") else tag
    return tag


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    art = None
    try:
        args = parser.parse_args(argv)
        defaults = {k: _OPTIONS[k][1] for k in args._keys}
        opts = _resolve(args, defaults)
        art = Artifacts(Path(opts["out"]) if opts.get("out") else Path("."), _stamp(opts, args.command))
        COMMANDS[args.command](opts, art)
        return EXIT_OK
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except UsageError as exc:
        _fail(art, f"datasuite: usage error: {exc}")
        return EXIT_USAGE
    except DataError as exc:
        _fail(art, f"datasuite: data error [{_module_tag(exc)}]: {exc}")
        return EXIT_DATA
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        _fail(art, f"datasuite: numerical failure [{_module_tag(exc)}]: {exc}")
        return EXIT_NUMERICAL
    except ValueError as exc:
        _fail(art, f"datasuite: usage error [{_module_tag(exc)}]: {exc}")
        return EXIT_USAGE


def _fail(art: Artifacts | None, message: str) -> None:
    if art is not None:
        art.rollback()
    print(message, file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
