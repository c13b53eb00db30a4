import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import expit, logit

from shiftmix.data import ScalingRecord, ShiftSpec, make_dataset
from shiftmix.density import fit_cond_density
from shiftmix.errors import ConfigurationError, NumericError
from shiftmix.superlearner import OUTCOME_GRID, cv_select
from shiftmix.tmle import (TmleEstimate, contrast, estimate_interaction, estimate_mean_y,
                           estimate_shift, fluctuate, target_shift, wald)

from conftest import linear_gaussian


def test_mean_y():
    e = estimate_mean_y([1.0, 2.0, 3.0])
    assert e.psi == 2.0 and list(e.eif) == [-1.0, 0.0, 1.0]
    assert estimate_mean_y(np.full(5, 3.0)).se == 0.0
    big = estimate_mean_y(np.random.default_rng(0).normal(5, 1, size=10**6))
    assert abs(big.psi - 5) < 0.01
    with pytest.raises(ConfigurationError):
        estimate_mean_y([])


def test_fluctuation_closed_forms():
    q = np.array([-1.0, 0.5, 2.0])
    assert fluctuate(q, np.ones(3), expit(q)).epsilon == pytest.approx(0.0, abs=1e-12)
    y = np.array([1.0] * 731 + [0.0] * 269)
    fl = fluctuate(np.zeros(1000), np.ones(1000), y)
    assert fl.epsilon == pytest.approx(logit(0.731), abs=1e-9)
    assert fl.epsilon == pytest.approx(1.0, abs=0.002)


@given(seed=st.integers(0, 10**6))
def test_fluctuation_solves_score(seed):
    r = np.random.default_rng(seed)
    n = 200
    q = r.normal(size=n)
    h = np.minimum(np.exp(r.normal(size=n)), 50)
    y = r.uniform(size=n)
    fl = fluctuate(q, h, y)
    score = np.sum(h * (y - expit(q + fl.epsilon * h)))
    assert abs(score) < 1e-8 and fl.converged and abs(fl.epsilon) < 10


def test_fluctuation_guards():
    with pytest.raises(NumericError):
        fluctuate(np.array([np.inf]), np.ones(1), np.ones(1))
    with pytest.raises(NumericError) as err:
        fluctuate(np.zeros(3), np.array([1e-6, 1e-6, 1e-6]), np.ones(3))
    assert err.value.last_iterate is not None


def test_wald():
    ci, p = wald(1.96, 1.0)
    assert ci == pytest.approx((0.0, 3.92)) and p == pytest.approx(0.05, abs=1e-4)
    assert wald(0.0, 0.0)[1] == 1.0


def _fits(d, seed=0):
    q = cv_select(OUTCOME_GRID, d.features(), d.y, seed)
    g = fit_cond_density(d["A"], {"W": d["W"]}, target="A")
    return q, g


def test_null_shift_identity():
    d = linear_gaussian(500, 0)
    q, g = _fits(d)
    rec = ScalingRecord(float(d.y.min()), float(d.y.max()))
    e = estimate_shift(d, ShiftSpec(("A",), {"A": 0.0}), q, g, rec)
    assert e.psi == pytest.approx(d.y.mean(), abs=1e-8)


def test_linear_gaussian_contrast():
    d = linear_gaussian(5000, 1)
    q, g = _fits(d)
    rec = ScalingRecord(float(d.y.min()), float(d.y.max()))
    e = estimate_shift(d, ShiftSpec(("A",), {"A": 1.0}), q, g, rec)
    c = contrast(e, estimate_mean_y(d.y))
    assert abs(c.psi - 2.0) < 0.1
    assert abs(np.mean(e.eif)) < 1e-8


@given(a=st.floats(0.1, 10), b=st.floats(-100, 100))
def test_affine_equivariance(a, b):
    r = np.random.default_rng(3)
    n = 300
    y = r.normal(size=n)
    q_obs = y + 0.3 * r.normal(size=n)
    q_shift = q_obs + 1.0
    h_obs = np.exp(0.3 * r.normal(size=n))
    h_shift = np.exp(0.3 * r.normal(size=n))

    def run(yy, qo, qs):
        rec = ScalingRecord(float(yy.min()), float(yy.max())).covering(qo, qs)
        e = target_shift(yy, qo, qs, h_obs, h_shift, rec)
        return contrast(e, estimate_mean_y(yy)).psi

    base = run(y, q_obs, q_shift)
    moved = run(a * y + b, a * q_obs + b, a * q_shift + b)
    assert moved == pytest.approx(a * base, rel=1e-6, abs=1e-6)


def test_interaction_linear_identity():
    r = np.random.default_rng(0)
    i1 = TmleEstimate.from_eif(1.0, r.normal(size=50), "individual")
    i2 = TmleEstimate.from_eif(2.0, r.normal(size=50), "individual")
    my = TmleEstimate.from_eif(0.5, r.normal(size=50), "mean_y")
    joint = TmleEstimate.from_eif(i1.psi + i2.psi - my.psi, i1.eif + i2.eif - my.eif, "joint")
    out = estimate_interaction(joint, i1, i2, my)
    assert out.psi == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(out.eif, 0.0, atol=1e-12)
    with pytest.raises(ConfigurationError):
        estimate_interaction(joint, i1, i2, estimate_mean_y(np.ones(3)))


def _two_exposure(n, seed, product):
    r = np.random.default_rng(seed)
    w = r.normal(size=n)
    a1 = 0.5 * w + r.normal(size=n)
    a2 = -0.3 * w + r.normal(size=n)
    y = a1 + 2 * a2 + w + (a1 * a2 if product else 0) + r.normal(size=n)
    return make_dataset({"W": w, "A1": a1, "A2": a2, "Y": y},
                        {"W": "covariate", "A1": "exposure", "A2": "exposure", "Y": "outcome"})


def _interaction(d, deltas, seed=0):
    from shiftmix.density import fit_joint_density

    q = cv_select(OUTCOME_GRID, d.features(), d.y, seed)
    g1 = fit_cond_density(d["A1"], {"W": d["W"], "A2": d["A2"]}, target="A1")
    g2 = fit_cond_density(d["A2"], {"W": d["W"], "A1": d["A1"]}, target="A2")
    gj = fit_joint_density(d["A1"], d["A2"], {"W": d["W"]}, names=("A1", "A2"))
    rec = ScalingRecord(float(d.y.min()), float(d.y.max()))
    s1 = ShiftSpec(("A1",), {"A1": deltas[0]})
    s2 = ShiftSpec(("A2",), {"A2": deltas[1]})
    sj = ShiftSpec(("A1", "A2"), {"A1": deltas[0], "A2": deltas[1]})
    return estimate_interaction(estimate_shift(d, sj, q, gj, rec), estimate_shift(d, s1, q, g1, rec),
                                estimate_shift(d, s2, q, g2, rec), estimate_mean_y(d.y))


def test_interaction_zero_shift():
    d = _two_exposure(400, 0, True)
    assert abs(_interaction(d, (0.0, 0.0)).psi) < 1e-8


def test_interaction_product_truth():
    est = _interaction(_two_exposure(3000, 1, True), (0.5, 0.5))
    assert abs(est.psi - 0.25) < 0.1


@pytest.mark.slow
def test_additive_truth_interaction_null():
    covered, small = 0, 0
    for seed in range(100):
        e = _interaction(_two_exposure(5000, 100 + seed, False), (0.5, 0.5), seed)
        covered += e.ci[0] <= 0 <= e.ci[1]
        small += abs(e.psi) < 0.15
    assert covered >= 90 and small == 100
