"""Location-scale conditional densities for exposures and their ratios.

HOSE: ``a = mu(w) + sigma * e`` with constant ``sigma``.
HESE: ``sigma(w)`` is learned from the log squared residuals.
Residuals are modelled as Gaussian, so ``g(a | w) = phi((a - mu) / sigma) / sigma``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .data import ShiftSpec
from .errors import ConfigurationError, DegenerateDataError, NumericError
from .learners import RegressionFit, predict
from .superlearner import DENSITY_GRID, LearnerGrid, cv_select

HALF_LOG_2PI = 0.5 * np.log(2 * np.pi)
# E[log Z^2] for Z ~ N(0, 1) is -(euler_gamma + log 2)
LOG_CHI2_MEAN = -(np.euler_gamma + np.log(2.0))
SIGMA_FLOOR_FRAC = 1e-3
_CONST = "_const"


def _context(cols, names, n):
    out = {k: np.asarray(cols[k], dtype=float) for k in names}
    out[_CONST] = np.zeros(n)
    return out


def _n(cols):
    return len(next(iter(cols.values())))


@dataclass(frozen=True, eq=False)
class CondDensityFit:
    target: str
    context: tuple
    mean_fit: RegressionFit
    error_kind: str  # "HOSE" | "HESE"
    sigma: float  # constant scale (HOSE) or floor-respecting fallback
    sigma_min: float
    scale_fit: Optional[RegressionFit] = None

    @property
    def targets(self):
        return (self.target,)

    def mean(self, cols):
        return predict(self.mean_fit, _context(cols, self.context, _n(cols)))

    def scale(self, cols):
        if self.scale_fit is None:
            return np.full(_n(cols), self.sigma)
        log_var = predict(self.scale_fit, _context(cols, self.context, _n(cols))) - LOG_CHI2_MEAN
        return np.maximum(np.exp(0.5 * log_var), self.sigma_min)

    def logpdf(self, cols):
        a = np.asarray(cols[self.target], dtype=float)
        s = self.scale(cols)
        z = (a - self.mean(cols)) / s
        return -0.5 * z * z - np.log(s) - HALF_LOG_2PI

    def pdf(self, cols):
        return np.exp(self.logpdf(cols))


@dataclass(frozen=True, eq=False)
class JointDensityFit:
    """``g(a1, a2 | w) = g(a1 | w) * g(a2 | a1, w)``."""

    first: CondDensityFit
    second: CondDensityFit

    @property
    def order(self):
        return (self.first.target, self.second.target)

    @property
    def targets(self):
        return self.order

    def logpdf(self, cols):
        return self.first.logpdf(cols) + self.second.logpdf(cols)

    def pdf(self, cols):
        return np.exp(self.logpdf(cols))


@dataclass(frozen=True)
class DensityRatio:
    values: np.ndarray = field(repr=False)
    cap: float
    n_capped: int
    raw_max: float


def fit_cond_density(a, context: Mapping, kind="HOSE", grid: LearnerGrid = DENSITY_GRID,
                     seed=0, target="A") -> CondDensityFit:
    a = np.asarray(a, dtype=float)
    n = len(a)
    if n < 30:
        raise ConfigurationError(f"density fit for {target!r} needs at least 30 rows, got {n}")
    if kind not in ("HOSE", "HESE"):
        raise ConfigurationError(f"unknown density kind {kind!r}")
    names = tuple(sorted(context))
    X = _context(context, names, n)
    sd = float(np.std(a))
    sigma_min = SIGMA_FLOOR_FRAC * sd
    if sd == 0.0:
        raise DegenerateDataError(f"exposure {target!r} is constant")
    mean_fit = cv_select(grid, X, a, seed)
    resid = a - mean_fit.fitted
    sigma = float(np.sqrt(np.mean(resid**2)))
    if sigma <= sigma_min:
        raise DegenerateDataError(f"exposure {target!r} is (nearly) deterministic given its context")
    scale_fit = None
    if kind == "HESE":
        z = np.log(np.maximum(resid**2, sigma_min**2))
        scale_fit = cv_select(grid, X, z, seed + 1)
    return CondDensityFit(target, names, mean_fit, kind, sigma, sigma_min, scale_fit)


def fit_joint_density(a1, a2, context: Mapping, kind="HOSE", grid=DENSITY_GRID, seed=0,
                      names=("A1", "A2")) -> JointDensityFit:
    first = fit_cond_density(a1, context, kind, grid, seed, names[0])
    ctx2 = dict(context)
    ctx2[names[0]] = a1
    second = fit_cond_density(a2, ctx2, kind, grid, seed + 7, names[1])
    return JointDensityFit(first, second)


def log_ratio(fit, cols, shift: ShiftSpec, at_shifted=False):
    """``log g(a - delta | w) - log g(a | w)``; with ``at_shifted`` the same ratio
    evaluated at the counterfactual point ``a + delta``, i.e. ``log g(a) - log g(a + delta)``."""
    if set(shift.targets) != set(fit.targets):
        raise ConfigurationError(f"shift targets {shift.targets} do not match density {fit.targets}")
    if at_shifted:
        return fit.logpdf(cols) - fit.logpdf(shift.apply(cols, +1.0))
    return fit.logpdf(shift.apply(cols, -1.0)) - fit.logpdf(cols)


def density_ratio(fit, rows, shift: ShiftSpec, lam=50.0, at_shifted=False) -> DensityRatio:
    cols = rows.columns if hasattr(rows, "columns") else rows
    if all(shift.delta[t] == 0 for t in shift.targets):
        n = _n(cols)
        return DensityRatio(np.ones(n), lam, 0, 1.0)
    h = np.exp(log_ratio(fit, cols, shift, at_shifted))
    bad = np.flatnonzero(~np.isfinite(h))
    if bad.size:
        raise NumericError(f"non-finite density ratio at row {int(bad[0])}")
    raw_max = float(h.max()) if h.size else 0.0
    capped = np.minimum(h, lam)
    return DensityRatio(capped, lam, int(np.sum(h > lam)), raw_max)
