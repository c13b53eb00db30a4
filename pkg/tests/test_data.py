import numpy as np
import pytest
from hypothesis import given, strategies as st

from shiftmix.data import (Dataset, ScalingRecord, ShiftSpec, derive_seed, is_binary, load_csv,
                           make_dataset, make_folds, scale_outcome, write_csv)
from shiftmix.errors import ConfigurationError, DataError, DegenerateDataError

ROLES = {"W": "covariate", "A2": "exposure", "A1": "exposure", "Y": "outcome"}


def small(n=10, seed=0):
    r = np.random.default_rng(seed)
    return make_dataset({k: r.normal(size=n) for k in ROLES}, ROLES)


def test_roles_and_sorted_names():
    d = small()
    assert d.outcome == "Y"
    assert d.exposures == ["A1", "A2"]
    assert d.covariates == ["W"]
    assert list(d.features()) == ["A1", "A2", "W"]


def test_columns_are_read_only():
    d = small()
    with pytest.raises(ValueError):
        d["A1"][0] = 3.0
    with pytest.raises(TypeError):
        d.columns["A1"] = np.zeros(10)


@pytest.mark.parametrize("roles", [
    {"W": "covariate", "A1": "exposure", "A2": "exposure", "Y": "exposure"},
    {"W": "covariate", "A1": "exposure", "A2": "exposure", "Y": "target"},
])
def test_bad_roles(roles):
    r = np.random.default_rng(0)
    with pytest.raises(ConfigurationError):
        Dataset({k: r.normal(size=5) for k in roles}, roles)


def test_missing_values_rejected():
    cols = {k: np.ones(4) for k in ROLES}
    cols["A1"] = np.array([1.0, np.nan, 2.0, 3.0])
    with pytest.raises(DataError):
        make_dataset(cols, ROLES)


def test_binary_detection():
    assert is_binary([0, 1, 1, 0])
    assert not is_binary([0, 0.5, 1])
    cols = {k: np.arange(6.0) for k in ROLES}
    cols["Y"] = np.array([0, 1, 0, 1, 1, 0.0])
    assert make_dataset(cols, ROLES).binary


def test_csv_round_trip(tmp_path):
    d = small(25)
    p = tmp_path / "d.csv"
    write_csv(d, p)
    back = load_csv(p, ROLES)
    for k in ROLES:
        np.testing.assert_array_equal(back[k], d[k])


def test_csv_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("Y,A1,A2,W\n1,2,3,4\n1,,3,4\n")
    with pytest.raises(DataError, match="row 3"):
        load_csv(p, ROLES)
    p.write_text("Y,A1,W\n1,2,4\n")
    with pytest.raises(ConfigurationError, match="A2"):
        load_csv(p, ROLES)
    with pytest.raises(ConfigurationError):
        load_csv(tmp_path / "absent.csv", ROLES)


@given(n=st.integers(2, 300), K=st.integers(2, 20), seed=st.integers(0, 2**31))
def test_folds_partition(n, K, seed):
    if K > n:
        with pytest.raises(ConfigurationError):
            make_folds(n, K, seed)
        return
    f = make_folds(n, K, seed)
    sizes = [len(f.valid(k)) for k in range(1, K + 1)]
    assert sum(sizes) == n and max(sizes) - min(sizes) <= 1
    for k in range(1, K + 1):
        tr, va = f.train(k), f.valid(k)
        assert len(np.intersect1d(tr, va)) == 0
        assert len(tr) + len(va) == n
    np.testing.assert_array_equal(f.membership, make_folds(n, K, seed).membership)


@given(lo=st.floats(-1e3, 1e3), width=st.floats(1e-3, 1e3),
       x=st.lists(st.floats(0, 1), min_size=1, max_size=20))
def test_scaling_round_trip(lo, width, x):
    rec = ScalingRecord(lo, lo + width)
    y = rec.unscale(np.array(x))
    np.testing.assert_allclose(rec.scale(y), x, atol=1e-9)


def test_scaling_covering_and_constant_outcome():
    rec = ScalingRecord(0.0, 1.0).covering(np.array([-1.0, 0.5]), np.array([3.0]))
    assert (rec.y_min, rec.y_max) == (-1.0, 3.0)
    d = small()
    cols = dict(d.columns)
    cols["Y"] = np.full(d.n, 2.0)
    with pytest.raises(DegenerateDataError):
        scale_outcome(make_dataset(cols, ROLES))
    scaled, rec = scale_outcome(d)
    assert scaled.y.min() == 0.0 and scaled.y.max() == 1.0


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(1, 2) == derive_seed(1, 2)
    assert len({derive_seed(1, k) for k in range(50)}) == 50


def test_shift_spec():
    d = small()
    s = ShiftSpec(("A1",), {"A1": 0.5, "A2": 9.0})
    assert dict(s.delta) == {"A1": 0.5}
    moved = s.apply(d.columns)
    np.testing.assert_allclose(moved["A1"], d["A1"] + 0.5)
    assert moved["A2"] is d["A2"]
    with pytest.raises(ConfigurationError):
        ShiftSpec(("A1", "A1"), {"A1": 1.0})
    with pytest.raises(ConfigurationError):
        ShiftSpec(("A1",), {"A1": float("inf")})
    with pytest.raises(ConfigurationError):
        ShiftSpec(("W",), {"W": 1.0}).check(d)
    with pytest.raises(ConfigurationError):
        ShiftSpec(("A1",), {"A1": 0.0}).check(d)
