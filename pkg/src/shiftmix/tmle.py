"""Targeted maximum likelihood for shift interventions and their contrasts."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import expit, logit
from scipy.stats import norm

from .data import Dataset, ScalingRecord, ShiftSpec
from .density import density_ratio
from .errors import ConfigurationError, NumericError
from .learners import RegressionFit, predict

PROB_CLIP = 1e-6
Z95 = 1.96
EPS_GUARD = 10.0


@dataclass(frozen=True, eq=False)
class TmleEstimate:
    psi: float
    eif: np.ndarray = field(repr=False)
    se: float
    ci: tuple
    p_value: float
    kind: str  # individual | joint | interaction | mean_y | contrast
    shift: Optional[ShiftSpec] = None
    epsilon: float = 0.0
    n_capped: int = 0

    @classmethod
    def from_eif(cls, psi, eif, kind, shift=None, **extra):
        eif = np.asarray(eif, dtype=float)
        m = len(eif)
        se = float(np.std(eif) / math.sqrt(m)) if m else float("nan")
        return cls(float(psi), eif, se, *wald(psi, se), kind, shift, **extra)


def wald(psi, se):
    ci = (psi - Z95 * se, psi + Z95 * se)
    if se > 0:
        p = float(2.0 * norm.sf(abs(psi) / se))
    else:
        p = 1.0 if psi == 0 else 0.0
    return ci, p


@dataclass(frozen=True)
class Fluctuation:
    epsilon: float
    converged: bool
    iterations: int = 0


def _clip(q):
    return np.clip(q, PROB_CLIP, 1.0 - PROB_CLIP)


def fluctuate(q_logit, h, y_scaled, tol=1e-10, max_iter=100) -> Fluctuation:
    """One-parameter logistic fluctuation along ``h`` with offset ``q_logit``.

    Newton-Raphson with step halving on the (concave) Bernoulli
    quasi-log-likelihood; returns the root of ``sum h (y - expit(q + eps h))``.
    """
    q_logit = np.asarray(q_logit, dtype=float)
    h = np.asarray(h, dtype=float)
    y = np.asarray(y_scaled, dtype=float)
    if not (np.all(np.isfinite(q_logit)) and np.all(np.isfinite(h))):
        raise NumericError("fluctuation inputs must be finite")
    if not np.any(h):
        return Fluctuation(0.0, True, 0)

    def loglik(e):
        eta = q_logit + e * h
        # y*eta - log(1 + exp(eta)), written stably
        return float(np.sum(y * eta - np.logaddexp(0.0, eta)))

    eps = 0.0
    ll = loglik(eps)
    n = len(y)
    for it in range(1, max_iter + 1):
        p = expit(q_logit + eps * h)
        score = float(np.sum(h * (y - p)))
        if abs(score) <= 1e-14 * n:
            return Fluctuation(eps, True, it)
        info = float(np.sum(h * h * p * (1.0 - p)))
        if info <= 0:
            raise NumericError("fluctuation information vanished", last_iterate=eps)
        step = score / info
        new_ll = loglik(eps + step)
        halvings = 0
        while new_ll < ll - 1e-12 * abs(ll) and halvings < 60:
            step *= 0.5
            new_ll = loglik(eps + step)
            halvings += 1
        eps, ll = eps + step, new_ll
        if abs(eps) > EPS_GUARD:
            raise NumericError(f"fluctuation diverged (epsilon={eps:.3g})", last_iterate=eps)
        if abs(step) < tol:
            return Fluctuation(eps, True, it)
    raise NumericError("fluctuation did not converge", last_iterate=eps)


def estimate_mean_y(y) -> TmleEstimate:
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise ConfigurationError("empty outcome vector")
    psi = float(y.mean())
    return TmleEstimate.from_eif(psi, y - psi, "mean_y")


def target_shift(y, q_obs, q_shift, h_obs, h_shift, scaling: ScalingRecord, kind="individual",
                 shift=None, n_capped=0) -> TmleEstimate:
    """Targeted plug-in for ``E[Q(a + delta, w)]`` from initial quantities.

    ``q_obs``/``q_shift`` are outcome-regression predictions on the original
    scale at the observed and shifted exposures; ``h_obs``/``h_shift`` the
    (capped) density ratios at the same points.
    """
    y_s = scaling.scale(y)
    lq_obs = logit(_clip(scaling.scale(q_obs)))
    lq_shift = logit(_clip(scaling.scale(q_shift)))
    fl = fluctuate(lq_obs, h_obs, y_s)
    q_obs_star = expit(lq_obs + fl.epsilon * h_obs)
    q_shift_star = expit(lq_shift + fl.epsilon * h_shift)
    psi_s = float(q_shift_star.mean())
    eif_s = h_obs * (y_s - q_obs_star) + q_shift_star - psi_s
    psi = float(scaling.unscale(psi_s))
    return TmleEstimate.from_eif(psi, eif_s * scaling.span, kind, shift,
                                 epsilon=fl.epsilon, n_capped=n_capped)


def estimate_shift(d: Dataset, shift: ShiftSpec, q: RegressionFit, g, scaling: ScalingRecord,
                   lam=50.0) -> TmleEstimate:
    """TMLE of ``E_delta[Y]`` on the rows of ``d`` (the population mean, not a contrast)."""
    shift.check(d, allow_zero=True)
    cols = dict(d.columns)
    q_obs = predict(q, cols)
    q_shift = predict(q, shift.apply(cols))
    h_obs = density_ratio(g, cols, shift, lam)
    h_shift = density_ratio(g, cols, shift, lam, at_shifted=True)
    if not d.binary:
        scaling = scaling.covering(d.y, q_obs, q_shift)
    kind = "individual" if len(shift.targets) == 1 else "joint"
    return target_shift(d.y, q_obs, q_shift, h_obs.values, h_shift.values, scaling, kind, shift,
                        h_obs.n_capped)


def contrast(a: TmleEstimate, b: TmleEstimate, kind="contrast") -> TmleEstimate:
    """``a - b`` with the EIF of the difference."""
    if len(a.eif) != len(b.eif):
        raise ConfigurationError("estimates computed on different rows")
    return TmleEstimate.from_eif(a.psi - b.psi, a.eif - b.eif, kind, a.shift,
                                 n_capped=a.n_capped)


def estimate_interaction(joint: TmleEstimate, ind1: TmleEstimate, ind2: TmleEstimate,
                         mean_y: TmleEstimate) -> TmleEstimate:
    """``E_joint - E_1 - E_2 + E[Y]``; the EIF is the same linear combination."""
    m = {len(e.eif) for e in (joint, ind1, ind2, mean_y)}
    if len(m) != 1:
        raise ConfigurationError("interaction components computed on different rows")
    psi = joint.psi - ind1.psi - ind2.psi + mean_y.psi
    eif = joint.eif - ind1.eif - ind2.eif + mean_y.eif
    return TmleEstimate.from_eif(psi, eif, "interaction", joint.shift)
