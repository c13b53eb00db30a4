import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import f as f_dist

from shiftmix.basis import INTERCEPT, BasisFunction, Factor
from shiftmix.discovery import (aggregate_and_threshold, discover, exposure_set, extract_bases,
                                type3_f)
from shiftmix.learners import RegressionFit


def lin(v):
    return BasisFunction((Factor(v),))


def hinge(v, t, d=1):
    return Factor(v, "hinge", t, d)


def brute_force_f(bases, X, y):
    """Refit every reduced model from scratch and form the F ratio."""
    n = len(y)
    cols = [np.ones(n)] + [b.evaluate(X, n) for b in bases]
    M = np.column_stack(cols)

    def sse(A):
        beta = np.linalg.lstsq(A, y, rcond=None)[0]
        r = y - A @ beta
        return float(r @ r)

    full = sse(M)
    p = M.shape[1]
    return {b: (sse(np.delete(M, j + 1, axis=1)) - full) / (full / (n - p))
            for j, b in enumerate(bases)}


@given(seed=st.integers(0, 10**6), n=st.integers(30, 200), p=st.integers(1, 8))
def test_type3_matches_brute_force(seed, n, p):
    r = np.random.default_rng(seed)
    X = {f"x{j}": r.normal(size=n) for j in range(p)}
    bases = [lin("x0")] + [BasisFunction((hinge(f"x{j}", 0.1 * j),)) for j in range(1, p)]
    y = sum(r.normal() * b.evaluate(X) for b in bases) + r.normal(size=n)
    got = type3_f(bases, X, y)
    want = brute_force_f(bases, X, y)
    for b in bases:
        assert got[b] == pytest.approx(want[b], rel=1e-8, abs=1e-8)


def test_collinear_later_basis_dropped(rng):
    x = rng.normal(size=100)
    X = {"a": x, "b": 2 * x}
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        out = type3_f([lin("a"), lin("b")], X, x + rng.normal(size=100))
    assert lin("a") in out and lin("b") not in out
    assert any("collinear" in str(m.message) for m in w)


def test_perfect_fit_is_infinite(rng):
    x = rng.normal(size=50)
    out = type3_f([lin("a"), lin("b")], {"a": x, "b": rng.normal(size=50)}, x)
    assert out[lin("a")] == math.inf


@given(seed=st.integers(0, 10**6), a=st.floats(0.01, 100), c=st.floats(-50, 50))
def test_f_invariant_to_affine_rescaling(seed, a, c):
    r = np.random.default_rng(seed)
    X = {"x": r.normal(size=60), "z": r.normal(size=60)}
    bases = [lin("x"), BasisFunction((hinge("z", 0.0),))]
    y = X["x"] + r.normal(size=60)
    f1 = type3_f(bases, X, y)
    f2 = type3_f(bases, X, a * y + c)
    for b in bases:
        assert f2[b] == pytest.approx(f1[b], rel=1e-7)


def test_orthonormal_design_null_column():
    hits = 0
    for seed in range(50):
        r = np.random.default_rng(seed)
        Q, _ = np.linalg.qr(r.normal(size=(1000, 2)))
        X = {"x1": Q[:, 0] * math.sqrt(1000), "x2": Q[:, 1] * math.sqrt(1000)}
        y = 5 * X["x1"] + r.normal(size=1000)
        f = type3_f([lin("x1"), lin("x2")], X, y)
        assert f[lin("x1")] > 100 * f[lin("x2")]
        hits += f_dist.sf(f[lin("x2")], 1, 1000 - 3) > 0.05
    assert hits >= 45


def test_exposure_attribution():
    ex = {"A1", "A3", "A4"}
    assert exposure_set(BasisFunction((hinge("A1", 0), hinge("A4", 1))), ex) == {"A1", "A4"}
    assert exposure_set(BasisFunction((hinge("A3", 5), Factor("W3"))), ex) == {"A3"}
    assert exposure_set(lin("W1"), ex) == frozenset()


def test_extract_bases_skips_intercept_and_zero_coefficients():
    bases = (INTERCEPT, lin("A1"), lin("A2"))
    fit = RegressionFit("mars", ("A1", "A2"), bases, np.array([1.0, 2.0, 0.0]), 0.0, np.zeros(1))
    assert extract_bases(fit) == [lin("A1")]
    only = RegressionFit("mars", (), (INTERCEPT,), np.array([1.0]), 0.0, np.zeros(1))
    assert extract_bases(only) == []


def test_threshold_examples():
    bases = [lin("A1"), lin("A2"), lin("A3"), lin("A4")]
    fmap = dict(zip(bases, [10.0, 5.0, 1.0, 0.5]))
    ex = ["A1", "A2", "A3", "A4"]
    top = aggregate_and_threshold(fmap, bases, ex, 0.75)
    assert [s.exposure_set for s in top] == [("A1",)]
    assert len(aggregate_and_threshold(fmap, bases, ex, 0.0)) == 4
    single = aggregate_and_threshold({bases[0]: 3.0}, bases[:1], ex, 1.0)
    assert [s.exposure_set for s in single] == [("A1",)]


def test_sums_per_set():
    b1 = BasisFunction((hinge("A1", 0),))
    b2 = BasisFunction((hinge("A1", 0, -1),))
    b3 = BasisFunction((hinge("A1", 0), hinge("A4", 0)))
    b4 = lin("W")
    out = aggregate_and_threshold({b1: 2.0, b2: 3.0, b3: 4.0, b4: 100.0}, [b1, b2, b3, b4],
                                  ["A1", "A4"])
    assert [(s.exposure_set, s.f_sum, s.n_bases) for s in out] == [(("A1",), 5.0, 2),
                                                                  (("A1", "A4"), 4.0, 1)]


@given(fs=st.lists(st.floats(0, 1e4), min_size=1, max_size=12), q=st.floats(0, 1))
def test_quantile_zero_is_superset(fs, q):
    bases = [lin(f"A{i}") for i in range(len(fs))]
    ex = [f"A{i}" for i in range(len(fs))]
    fmap = dict(zip(bases, fs))
    all_sets = {s.exposure_set for s in aggregate_and_threshold(fmap, bases, ex, 0.0)}
    some = aggregate_and_threshold(fmap, bases, ex, q)
    assert {s.exposure_set for s in some} <= all_sets
    assert some  # the maximum always survives
    assert sum(s.n_bases for s in some) <= len(bases)


def test_discover_on_product_signal(rng):
    from shiftmix.mars import fit_mars

    n = 600
    X = {k: rng.uniform(size=n) for k in ("A1", "A2", "W")}
    y = 4 * X["A1"] * X["A2"] + X["W"] + 0.05 * rng.normal(size=n)
    fit = fit_mars(X, y)
    sets, fmap = discover(fit, X, y, ["A1", "A2"])
    assert ("A1", "A2") in [s.exposure_set for s in sets]
    assert all(v >= 0 for v in fmap.values())
