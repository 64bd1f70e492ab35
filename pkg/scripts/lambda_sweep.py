"""Number of inconsistent rows as lambda varies on a synthetic config.

The score column is the fraction of flagged rows that were actually perturbed.
"""
from __future__ import annotations

import argparse

import numpy as np

from datasuite.bench import SWEEP_LAMBDAS, synth_lambda_sweep
from datasuite.synth import NAMED_CONFIGS, get_config


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="Da_p50", choices=sorted(NAMED_CONFIGS))
    ap.add_argument("--seeds", type=int, default=3)
    args = ap.parse_args()

    table = [synth_lambda_sweep(get_config(args.config, s)) for s in range(args.seeds)]
    print(f"{'lambda':>6} {'flagged':>9} {'perturbed share':>16}")
    for i, lam in enumerate(SWEEP_LAMBDAS):
        flagged = np.mean([rows[i]["flagged"] for rows in table])
        scores = [rows[i]["score"] for rows in table if rows[i]["score"] is not None]
        share = f"{np.mean(scores):.3f}" if scores else "-"
        print(f"{lam:>6.1f} {flagged:>9.1f} {share:>16}")


if __name__ == "__main__":
    main()
