import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from datasuite.data import from_array
from datasuite.errors import DataError
from datasuite.synth import (
    DEFAULT_COV,
    DEFAULT_MEAN,
    NAMED_CONFIGS,
    NOISE_FAMILIES,
    SynthConfig,
    downstream_regression_mse,
    fit_linear,
    generate_gaussian,
    get_config,
    make_experiment,
    noise,
    perturb,
)


def test_sample_moments_match_target():
    train, test = generate_gaussian(SynthConfig(n=20000, seed=3))
    x = np.vstack([train.values, test.values])
    np.testing.assert_allclose(x.mean(axis=0), DEFAULT_MEAN, atol=0.05)
    np.testing.assert_allclose(np.cov(x.T), DEFAULT_COV, atol=0.05)
    assert train.names == ("X1", "X2", "X3")


def test_identity_covariance():
    train, _ = generate_gaussian(SynthConfig(n=20000, mean=(0, 0, 0), cov=np.eye(3).tolist(), seed=1))
    np.testing.assert_allclose(np.cov(train.values.T), np.eye(3), atol=0.05)


def test_train_and_test_are_independent_draws():
    train, test = generate_gaussian(SynthConfig(n=101))
    assert train.n_rows == test.n_rows == 101
    assert not np.array_equal(train.values, test.values)


def test_non_spd_covariance_rejected():
    with pytest.raises(DataError):
        generate_gaussian(SynthConfig(cov=[[1, 2, 0], [2, 1, 0], [0, 0, 1]]))


def test_invalid_config_values():
    with pytest.raises(ValueError):
        SynthConfig(proportion=1.5)
    with pytest.raises(ValueError):
        SynthConfig(family="cauchy")


def test_zero_proportion_is_noop():
    _, test = generate_gaussian(SynthConfig(n=200))
    out, mask = perturb(test, SynthConfig(n=200, proportion=0.0))
    assert not mask.any()
    np.testing.assert_array_equal(out.values, test.values)


def test_full_perturbation_variance():
    cfg = SynthConfig(n=20000, proportion=1.0, variance=2.0, seed=5)
    _, test = generate_gaussian(cfg)
    out, mask = perturb(test, cfg)
    assert mask.all()
    diff = out.values - test.values
    assert np.all(np.abs(diff.var(axis=0) - 2.0) < 0.3)


def test_perturbed_count_and_rows():
    cfg = SynthConfig(n=1000, proportion=0.25, seed=2)
    _, test = generate_gaussian(cfg)
    out, mask = perturb(test, cfg)
    assert mask.sum() == 250
    np.testing.assert_array_equal(out.values[~mask], test.values[~mask])
    assert np.all(out.values[mask] != test.values[mask])


@pytest.mark.parametrize("family", NOISE_FAMILIES)
def test_noise_families_standardized(family):
    z = noise(family, 4.0, (50000,), np.random.default_rng(0))
    assert abs(z.mean()) < 0.05 and abs(z.var() - 4.0) < 0.15


@given(seed=st.integers(0, 2**16), name=st.sampled_from(sorted(NAMED_CONFIGS)))
@settings(max_examples=15, deadline=None)
def test_named_configs_are_deterministic(seed, name):
    a = make_experiment(get_config(name, seed))
    b = make_experiment(get_config(name, seed))
    np.testing.assert_array_equal(a.test.values, b.test.values)
    np.testing.assert_array_equal(a.mask, b.mask)


def test_named_config_values():
    assert get_config("Da_p25").proportion == 0.25
    assert get_config("Db_v3").variance == 9.0
    assert get_config("Dc_gamma").family == "gamma"
    with pytest.raises(KeyError):
        get_config("nope")


def test_exact_linear_relation_gives_zero_mse(rng):
    x = rng.normal(size=(200, 2))
    y = 1.5 * x[:, 0] - 2 * x[:, 1] + 0.25
    ds = from_array(np.column_stack([x, y]))
    assert downstream_regression_mse(ds, ds) < 1e-12
    model = fit_linear(x, y)
    np.testing.assert_allclose(model.coef, [1.5, -2.0], atol=1e-10)


def test_singular_design_rejected():
    with pytest.raises(DataError):
        fit_linear(np.ones((10, 2)), np.arange(10.0))


def test_clean_baseline_matches_conditional_variance():
    # residual variance of X3 given X1, X2 under the default covariance
    cov = np.asarray(DEFAULT_COV)
    cond = cov[2, 2] - cov[2, :2] @ np.linalg.solve(cov[:2, :2], cov[:2, 2])
    cfg = SynthConfig(n=20000, seed=11)
    train, test = generate_gaussian(cfg)
    assert downstream_regression_mse(train, test) == pytest.approx(cond, rel=0.05)
    assert 0.05 < cond < 0.08
