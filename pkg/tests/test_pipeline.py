import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from datasuite.data import SplitSpec, from_array, load_csv, split_indices
from datasuite.errors import DataError
from datasuite.pipeline import DataSuite, PipelineConfig, config_hash, fit_suite, label_values, prepare


@pytest.fixture
def train(rng):
    cov = [[1, 0.6, 0.2], [0.6, 1, 0.3], [0.2, 0.3, 1]]
    return from_array(rng.multivariate_normal([0, 0, 0], cov, size=300))


def test_save_load_round_trip(train, tmp_path, rng):
    suite = fit_suite(train, PipelineConfig(seed=3))
    suite.save(tmp_path / "m.json")
    again = DataSuite.load(tmp_path / "m.json")
    test = from_array(rng.normal(size=(50, 3)))
    a, ra = suite.stratify(test)
    b, rb = again.stratify(test)
    np.testing.assert_array_equal(a.lower, b.lower)
    np.testing.assert_array_equal(ra.order, rb.order)
    assert again.config == suite.config and again.vine is not None


def test_same_seed_is_deterministic(train):
    a = fit_suite(train, PipelineConfig(seed=1))
    b = fit_suite(train, PipelineConfig(seed=1))
    assert json.dumps(a.to_dict(), sort_keys=True) == json.dumps(b.to_dict(), sort_keys=True)


def test_augmentation_none_has_no_vine(train):
    suite = fit_suite(train, PipelineConfig(augmentation="none"))
    assert suite.vine is None
    iv = suite.intervals(train)
    assert iv.lower.shape == (300, 3)


def test_single_feature_skips_vine(rng):
    with pytest.warns(UserWarning):
        suite = fit_suite(from_array(rng.normal(size=(100, 1))))
    assert suite.vine is None


def test_schema_mismatch(train, rng):
    suite = fit_suite(train, PipelineConfig(augmentation="none"))
    with pytest.raises(DataError):
        suite.intervals(from_array(rng.normal(size=(5, 3)), names=["a", "b", "c"]))


def test_constant_feature_rejected(rng):
    x = rng.normal(size=(50, 2))
    x[:, 1] = 4.0
    with pytest.raises(DataError):
        fit_suite(from_array(x))


@pytest.mark.parametrize(
    "kwargs",
    [{"alpha": 0.0}, {"alpha": 1.0}, {"lam": 1.2}, {"proper_fraction": 1.0}, {"augmentation": "x"},
     {"normalizer": "svm"}, {"vine_order": "random"}, {"seed": 1.5}, {"floor_fraction": 0.0}],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        PipelineConfig(**kwargs)


def test_config_from_dict_rejects_unknown():
    with pytest.raises(ValueError):
        PipelineConfig.from_dict({"alfa": 0.1})
    assert PipelineConfig.from_dict({"alpha": 0.1}).alpha == 0.1


def test_config_hash_ignores_key_order():
    assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})
    assert PipelineConfig(seed=1).hash() != PipelineConfig(seed=2).hash()


@given(n=st.integers(4, 500), frac=st.floats(0.05, 0.95), seed=st.integers(0, 1000))
@settings(max_examples=50)
def test_proper_and_calibration_are_disjoint(n, frac, seed):
    n_proper = int(np.floor(n * frac))
    if n_proper in (0, n):
        with pytest.raises(DataError):
            split_indices(n, SplitSpec(frac, seed))
        return
    proper, cal = split_indices(n, SplitSpec(frac, seed))
    assert proper.size == n_proper
    assert np.intersect1d(proper, cal).size == 0
    assert np.union1d(proper, cal).size == n
    assert proper.size >= 1 and cal.size >= 1


@pytest.mark.filterwarnings("ignore::UserWarning")
def test_prepare_categorical_label(write_csv):
    tr = load_csv(write_csv("tr.csv", "x,c,k,y\n1,A,5,yes\n2,B,5,no\n3,A,5,yes\n4,B,5,no\n"))
    te = load_csv(write_csv("te.csv", "x,c,k,y\n5,B,5,no\n6,C,5,yes\n"))
    prep = prepare(tr, te, label="y")
    assert list(prep.y_train) == ["yes", "no", "yes", "no"]
    assert list(prep.y_test) == ["no", "yes"]
    assert "k" in prep.dropped
    assert prep.train.names == prep.test.names
    assert "c=C" not in prep.train.names
    assert prep.encoding.unseen


def test_prepare_missing_label(write_csv):
    ds = load_csv(write_csv("a.csv", "x,y\n1,2\n3,4\n"))
    with pytest.raises(DataError):
        prepare(ds, label="z")


def test_label_values_numeric(write_csv):
    ds = load_csv(write_csv("a.csv", "x,y\n1,0\n3,1\n"))
    np.testing.assert_array_equal(label_values(ds, "y"), [0.0, 1.0])
