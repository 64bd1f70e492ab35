"""MPI of a tree ensemble on the Adult census data.

Needs the raw files under data/adult (see fetch_adult.py). Each seed draws a
fresh train/test split and refits everything; expect about 40 s per seed.
"""
from __future__ import annotations

import argparse
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from datasuite.bench import classification_mpi
from datasuite.datasets import adult_split, load_adult
from datasuite.pipeline import PipelineConfig

ROOT = Path(__file__).resolve().parents[1]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data", type=Path, default=ROOT / "data" / "adult" / "adult.data")
    ap.add_argument("--seeds", type=int, default=1)
    ap.add_argument("--trees", type=int, default=100)
    ap.add_argument("--normalizer", default="knn", choices=["knn", "tree"])
    ap.add_argument("--augmentation", default="union", choices=["union", "synthetic", "none"])
    ap.add_argument("--floor-fraction", type=float, default=PipelineConfig.floor_fraction)
    args = ap.parse_args()

    ds = load_adult(args.data)
    base = PipelineConfig(normalizer=args.normalizer, augmentation=args.augmentation,
                          floor_fraction=args.floor_fraction)
    values = []
    for seed in range(args.seeds):
        t0 = time.perf_counter()
        Xtr, ytr, Xte, yte = adult_split(ds, seed)
        run = classification_mpi(Xtr, ytr, Xte, yte, replace(base, seed=seed), n_trees=args.trees)
        values.append(run.mpi.mpi)
        print(f"seed {seed}: MPI {run.mpi.mpi:+.4f}  accuracy {run.curve.baseline:.4f}  "
              f"OOB {run.oob_accuracy:.4f}  ({time.perf_counter() - t0:.0f}s)")
        for p, c, u in zip(run.mpi.proportions, run.mpi.acc_certain, run.mpi.acc_uncertain):
            print(f"    p={p:.2f}  certain {c:.4f}  uncertain {u:.4f}")
    if len(values) > 1:
        print(f"MPI mean {np.mean(values):+.4f} sd {np.std(values):.4f}")


if __name__ == "__main__":
    main()
