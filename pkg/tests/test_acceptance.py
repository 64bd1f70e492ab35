"""Acceptance criteria, one test each, with a PASS/FAIL line printed per criterion.

Run with ``pytest tests/test_acceptance.py -v`` (add ``-s`` to see the lines
interleaved with the pytest output; they are printed either way).
"""
import math
import time
from decimal import ROUND_CEILING, Decimal
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp
from scipy import stats

from datasuite.bench import synth_bench
from datasuite.conformal import calibrate, calibration_scores, critical_score, fit_conformal, predict_intervals
from datasuite.data import SplitSpec, from_array, split_proper_calibration
from datasuite.generator import fit_dvine, sample_dvine
from datasuite.intervals import IntervalSet
from datasuite.metrics import interval_quality
from datasuite.pipeline import PipelineConfig
from datasuite.representer import fit_representer
from datasuite.stratify import PROPORTIONS, StratificationReport, lambda_sweep, rank_by_uncertainty
from datasuite.synth import get_config

SEEDS = range(5)
ADULT = Path(__file__).resolve().parents[1] / "data" / "adult" / "adult.data"


def report_line(capsys, number, title, ok, detail):
    with capsys.disabled():
        print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'}: {title} ({detail})")


@pytest.fixture(scope="module")
def da_runs():
    runs, times = [], []
    for seed in SEEDS:
        t0 = time.perf_counter()
        runs.append(synth_bench(get_config("Da_p50", seed), PipelineConfig()))
        times.append(time.perf_counter() - t0)
    return runs, times


def test_c1_conformal_validity(da_runs, capsys):
    runs, times = da_runs
    cov = np.array([r.coverage_clean for r in runs])
    ok = cov.mean() >= 0.93 and max(times) < 120
    report_line(capsys, 1, "coverage on clean test rows >= 0.93", ok,
                f"mean {cov.mean():.4f}, per seed {np.round(cov, 4).tolist()}, slowest run {max(times):.1f}s")
    assert ok


def test_c2_downstream_mse_ordering(da_runs, capsys):
    runs, times = da_runs
    cert = np.mean([r.certain_mse for r in runs])
    full = np.mean([r.test_mse for r in runs])
    inc = np.mean([r.inconsistent_mse for r in runs])
    ok = cert < full < inc and cert <= 0.35 and 0.6 <= full <= 1.2 and inc >= 1.5 and sum(times) < 300
    report_line(capsys, 2, "MSE certain < full < inconsistent with bounds", ok,
                f"certain {cert:.3f}, full {full:.3f}, inconsistent {inc:.3f}, total {sum(times):.1f}s")
    assert ok


@st.composite
def interval_sets(draw):
    n = draw(st.integers(1, 40))
    d = draw(st.integers(1, 5))
    kind = draw(st.sampled_from(["inside", "outside", "mixed"]))
    center = draw(hnp.arrays(float, (n, d), elements=st.floats(-1e3, 1e3)))
    half = draw(hnp.arrays(float, (n, d), elements=st.floats(0, 1e2)))
    jitter = draw(hnp.arrays(float, (n, d), elements=st.floats(-1, 1)))
    if kind == "inside":
        obs = center + jitter * half
    elif kind == "outside":
        obs = center + np.where(jitter >= 0, 1, -1) * (half + 1 + np.abs(jitter))
    else:
        obs = center + jitter * 3 * (half + 1)
    return center, half, np.clip(obs, center - 1e6, center + 1e6)


def test_c3_quality_identities(capsys):
    checked = {"n": 0, "full": 0, "empty": 0}

    @settings(max_examples=1000, deadline=None, database=None)
    @given(interval_sets())
    def prop(sets):
        center, half, obs = sets
        d = center.shape[1]
        iv = IntervalSet(tuple(f"x{j}" for j in range(d)), center, half, np.ones(d),
                         np.tile([0.0, 1.0], (d, 1)), obs)
        q = interval_quality(iv)
        checked["n"] += 1
        if q.coverage == 1.0:
            checked["full"] += 1
            assert q.deficit == 0.0
        if q.coverage == 0.0:
            checked["empty"] += 1
            assert q.excess == 0.0

    prop()
    ok = checked["n"] >= 1000 and checked["full"] > 0 and checked["empty"] > 0
    report_line(capsys, 3, "coverage=1 => deficit=0, coverage=0 => excess=0", ok,
                f"{checked['n']} sets, {checked['full']} fully covered, {checked['empty']} fully missed")
    assert ok


def _oracle(scores, alpha):
    n = len(scores)
    k = int(((n + 1) * (1 - Decimal(str(alpha)))).to_integral_value(rounding=ROUND_CEILING))
    return math.inf if k > n else sorted(scores)[k - 1]


def test_c4_critical_score_oracle(capsys):
    rng = np.random.default_rng(2024)
    mismatches = 0
    total = 0
    for _ in range(500):
        n = int(rng.integers(1, 400))
        scores = rng.exponential(size=n)
        if rng.random() < 0.3:  # heavy ties
            scores = np.round(scores, 1)
        for alpha in (0.01, 0.05, 0.1):
            total += 1
            mismatches += critical_score(scores, alpha) != _oracle(scores.tolist(), alpha)

    # the same rule as applied inside calibrate on a fitted model
    x = from_array(rng.multivariate_normal([0, 0, 0], np.eye(3) * 0.5 + 0.5, size=600))
    proper, cal = split_proper_calibration(x, SplitSpec(seed=1))
    model = fit_conformal(proper, cal, fit_representer(proper), np.tile([-4.0, 4.0], (3, 1)))
    s = calibration_scores(model.representer, model.regressors, model.normalizers, cal)
    for alpha in (0.01, 0.05, 0.1):
        eps = calibrate(model.representer, model.regressors, model.normalizers, cal, alpha, model.ranges).eps
        total += 3
        mismatches += sum(eps[j] != _oracle(s[:, j].tolist(), alpha) for j in range(3))

    ok = mismatches == 0
    report_line(capsys, 4, "critical score equals sort-and-index oracle", ok, f"{total} comparisons, {mismatches} mismatches")
    assert ok


def test_c5_copula_fidelity(capsys):
    rng = np.random.default_rng(5)
    z = rng.multivariate_normal([0, 0], [[1, 0.7], [0.7, 1]], size=5000)
    x = np.column_stack([np.exp(z[:, 0]), 3 * z[:, 1] + 1])
    model = fit_dvine(from_array(x))
    s = sample_dvine(model, 5000, seed=6).values
    tau_data = stats.kendalltau(x[:, 0], x[:, 1]).statistic
    tau_sample = stats.kendalltau(s[:, 0], s[:, 1]).statistic
    ks = [stats.ks_2samp(s[:, j], x[:, j]).statistic for j in range(2)]
    ok = abs(tau_sample - tau_data) <= 0.05 and max(ks) < 0.05
    report_line(capsys, 5, "vine reproduces Kendall tau and marginals", ok,
                f"tau data {tau_data:.4f} vs sample {tau_sample:.4f}, KS {max(ks):.4f}")
    assert ok


def test_c6_monotonicity(capsys):
    counts = {"eps": 0, "nest": 0, "lambda": 0, "prefix": 0}

    @settings(max_examples=300, deadline=None, database=None)
    @given(hnp.arrays(float, st.integers(1, 200), elements=st.floats(0, 1e3)),
           st.floats(0.001, 0.999), st.floats(0.001, 0.999))
    def eps_monotone(scores, a, b):
        a, b = sorted((a, b))
        counts["eps"] += 1
        assert critical_score(scores, a) >= critical_score(scores, b)

    @settings(max_examples=300, deadline=None, database=None)
    @given(hnp.arrays(float, st.integers(1, 60), elements=st.sampled_from([0.0, 0.2, 1 / 3, 0.5, 2 / 3, 1.0])))
    def lambda_monotone(nu):
        counts["lambda"] += 1
        flagged = [r["flagged"] for r in lambda_sweep(nu, [k / 20 for k in range(21)])]
        assert all(x >= y for x, y in zip(flagged, flagged[1:]))

    @settings(max_examples=300, deadline=None, database=None)
    @given(hnp.arrays(float, st.integers(1, 150), elements=st.floats(0, 1) | st.just(0.5)))
    def prefix(delta):
        counts["prefix"] += 1
        order = rank_by_uncertainty(delta)
        rep = StratificationReport(np.zeros(delta.size), np.zeros(delta.size, bool), delta, order, 0.5)
        prev_c, prev_u = set(), set()
        for p in PROPORTIONS:
            c, u = rep.groups(p)
            assert prev_c <= set(c) and prev_u <= set(u)
            prev_c, prev_u = set(c), set(u)

    eps_monotone()
    lambda_monotone()
    prefix()

    rng = np.random.default_rng(3)
    x = from_array(rng.multivariate_normal([0, 0, 0], np.eye(3) * 0.5 + 0.5, size=600))
    proper, cal = split_proper_calibration(x, SplitSpec(seed=2))
    base = fit_conformal(proper, cal, fit_representer(proper), np.tile([-4.0, 4.0], (3, 1)))
    alphas = [0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5]
    ivs = [predict_intervals(calibrate(base.representer, base.regressors, base.normalizers, cal, a, base.ranges), x)
           for a in alphas]
    for wide, narrow in zip(ivs, ivs[1:]):
        counts["nest"] += 1
        assert np.all(wide.lower <= narrow.lower) and np.all(wide.upper >= narrow.upper)

    ok = all(v > 0 for v in counts.values())
    report_line(capsys, 6, "eps, nesting, lambda count and prefix monotonicity", ok,
                ", ".join(f"{k}: {v} cases" for k, v in counts.items()))
    assert ok


def test_c7_mechanism(da_runs, capsys):
    runs, _ = da_runs
    margins = [r.delta_margin for r in runs]
    ok = all(m >= 0.01 for m in margins)
    report_line(capsys, 7, "mean delta perturbed exceeds clean by >= 0.01 on 5/5 seeds", ok,
                f"margins {np.round(margins, 4).tolist()}")
    assert ok


@pytest.mark.slow
def test_c8_adult_mpi_sign(capsys):
    """Stretch criterion, not gating: a negative sign is reported and marked xfail."""
    if not ADULT.exists():
        report_line(capsys, 8, "MPI > 0 on Adult", False, "SKIPPED: data/adult missing, run scripts/fetch_adult.py")
        pytest.skip("Adult data not downloaded")
    from datasuite.bench import classification_mpi
    from datasuite.datasets import adult_split, load_adult

    Xtr, ytr, Xte, yte = adult_split(load_adult(ADULT), seed=0)
    t0 = time.perf_counter()
    run = classification_mpi(Xtr, ytr, Xte, yte, PipelineConfig(seed=0))
    value = run.mpi.mpi
    ok = value > 0
    report_line(capsys, 8, "MPI > 0 on Adult (stretch)", ok,
                f"MPI {value:+.4f}, baseline accuracy {run.curve.baseline:.4f}, {time.perf_counter() - t0:.0f}s")
    assert np.isfinite(value)
    if not ok:
        pytest.xfail(f"stretch criterion not met: MPI {value:+.4f} <= 0")
