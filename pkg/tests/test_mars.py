import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from shiftmix import _kernels
from shiftmix.errors import ConfigurationError
from shiftmix.learners import predict
from shiftmix.mars import (MarsHyper, backward_prune, candidate_knots, finish, fit_mars,
                           forward_pass, gcv)

needs_numba = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba disabled")


def labels(bases):
    return [b.label() for b in bases]


@needs_numba
@given(seed=st.integers(0, 10**6), p=st.integers(1, 4), deg=st.sampled_from([1, 2]))
def test_backends_pick_identical_bases(seed, p, deg):
    r = np.random.default_rng(seed)
    n = 60 + 10 * p
    X = r.normal(size=(n, p))
    y = np.maximum(X[:, 0], 0) * (1 + X[:, -1]) + 0.3 * r.normal(size=n)
    names = [f"x{j}" for j in range(p)]
    a = forward_pass(X, y, names, deg, 8, 15, scan=_kernels.scan_numba)
    b = forward_pass(X, y, names, deg, 8, 15, scan=_kernels.scan_numpy)
    assert labels(a.bases) == labels(b.bases)
    np.testing.assert_allclose(a.mse, b.mse, rtol=1e-8, atol=1e-12)


def test_numpy_fallback_selected_by_env():
    env = dict(os.environ, SHIFTMIX_NO_NUMBA="1")
    code = "from shiftmix import _accel, _kernels; print(_accel.backend(), _kernels.scan is _kernels.scan_numpy)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True).stdout.split()
    assert out == ["numpy", "True"]


def test_candidate_knots_are_interior(rng):
    x = rng.normal(size=500)
    k = candidate_knots(x, 10)
    assert len(k) == 10 and k.min() > x.min() and k.max() < x.max()
    assert len(candidate_knots(np.ones(10), 5)) == 0
    assert len(candidate_knots(np.array([0.0, 1.0] * 20), 5)) == 0


def test_recovers_single_hinge(rng):
    x = rng.uniform(-2, 2, size=400)
    y = 3.0 * np.maximum(0.0, x - 0.0) + 1.0
    fit = fit_mars(x[:, None], y, MarsHyper(max_degree=1, knot_grid_size=19))
    assert fit.training_mse < 5e-3
    grid = np.linspace(-1.9, 1.9, 50)
    np.testing.assert_allclose(predict(fit, grid[:, None]), 3.0 * np.maximum(grid, 0) + 1.0,
                               atol=0.1)


def test_degree_two_captures_product(rng):
    X = rng.normal(size=(800, 3))
    y = X[:, 0] * X[:, 1] + 0.1 * rng.normal(size=800)
    fit = fit_mars(X, y, MarsHyper(max_degree=2, max_terms=21))
    assert any(b.variable_set == {"x0", "x1"} for b in fit.bases)
    assert 1 - fit.training_mse / y.var() > 0.9
    additive = fit_mars(X, y, MarsHyper(max_degree=1))
    assert all(b.degree <= 1 for b in additive.bases)


def test_no_variable_repeats_within_a_product(rng):
    X = rng.normal(size=(500, 2))
    y = X[:, 0] ** 2 + X[:, 0] * X[:, 1]
    fit = fit_mars(X, y)
    for b in fit.bases:
        vs = [f.var for f in b.factors]
        assert len(vs) == len(set(vs))


def test_null_signal_prunes_to_small_model(rng):
    X = rng.normal(size=(1000, 4))
    y = rng.normal(size=1000)
    fit = fit_mars(X, y)
    r2 = 1 - fit.training_mse / y.var()
    assert r2 < 0.1


def test_prefix_property(rng):
    X = rng.normal(size=(300, 3))
    y = np.sin(2 * X[:, 0]) + X[:, 1] * X[:, 2] + 0.2 * rng.normal(size=300)
    names = ["a", "b", "c"]
    long = forward_pass(X, y, names, 2, 10, 21)
    short = forward_pass(X, y, names, 2, 10, 11)
    bases, B, _ = long.truncated(11)
    assert labels(bases) == labels(short.bases)
    np.testing.assert_allclose(B, short.B)


def test_gcv_and_prune(rng):
    assert gcv(10.0, 100, 5, 3.0) == pytest.approx(10.0 / 100 / (1 - 11.0 / 100) ** 2)
    assert gcv(1.0, 10, 10, 3.0) == np.inf
    n = 200
    B = np.column_stack([np.ones(n), rng.normal(size=n), rng.normal(size=n)])
    y = 2 * B[:, 1] + 0.01 * rng.normal(size=n)
    keep = backward_prune(B, y, 3.0)
    assert keep == [0, 1]


def test_unpruned_keeps_forward_terms(rng):
    X = rng.normal(size=(200, 2))
    y = X[:, 0] + rng.normal(size=200)
    fw = forward_pass(X, y, ["a", "b"], 1, 10, 11)
    fit = finish(fw, y, MarsHyper(max_degree=1, max_terms=11, prune=False))
    assert len(fit.bases) == len(fw.truncated(11)[0])


def test_small_samples_fall_back_to_linear(rng):
    X = rng.normal(size=(15, 2))
    fit = fit_mars(X, X[:, 0])
    assert fit.kind == "linear"


@pytest.mark.parametrize("kw", [{"max_degree": 3}, {"max_terms": 1}, {"knot_grid_size": 2}])
def test_hyper_validation(kw):
    with pytest.raises(ConfigurationError):
        MarsHyper(**kw)


def test_recovers_known_knot(rng):
    x = rng.uniform(0, 1, size=500)
    y = np.maximum(0.0, x - 0.5) + 0.01 * rng.normal(size=500)
    fit = fit_mars(x[:, None], y, MarsHyper(max_degree=1))
    knots = [f.knot for b in fit.bases for f in b.factors if f.kind == "hinge"]
    assert knots and min(abs(k - 0.5) for k in knots) < 0.1


def test_training_on_predictions_matches_fitted(rng):
    X = rng.normal(size=(300, 3))
    y = np.abs(X[:, 0]) + X[:, 1] * X[:, 2]
    fit = fit_mars(X, y)
    np.testing.assert_allclose(predict(fit, X), fit.fitted, atol=1e-10)


@given(seed=st.integers(0, 10**6))
def test_forward_mse_non_increasing(seed):
    r = np.random.default_rng(seed)
    X = r.normal(size=(150, 3))
    y = np.sin(X[:, 0]) + X[:, 1] * X[:, 2] + r.normal(size=150)
    fw = forward_pass(X, y, ["a", "b", "c"], 2, 10, 21)
    assert np.all(np.diff(fw.mse) <= 1e-12)
