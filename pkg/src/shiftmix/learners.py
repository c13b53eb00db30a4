"""Linear / ridge regression and the shared fitted-model container."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.linalg import solve_triangular

from .basis import INTERCEPT, BasisFunction, Factor, design
from .errors import ConfigurationError, NumericError


@dataclass(frozen=True, eq=False)
class RegressionFit:
    kind: str  # "linear" | "ridge" | "mars"
    names: tuple
    bases: tuple
    coefficients: np.ndarray
    training_mse: float
    fitted: np.ndarray = field(repr=False)
    info: dict = field(default_factory=dict, repr=False)

    @property
    def variables(self) -> frozenset:
        out = frozenset()
        for b in self.bases:
            out |= b.variable_set
        return out


def as_columns(X, names=None) -> dict:
    """Normalise a design matrix to a name -> column mapping."""
    if isinstance(X, Mapping):
        cols = {k: np.asarray(X[k], dtype=float) for k in (names or X.keys())}
    else:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if names is None:
            names = [f"x{j}" for j in range(X.shape[1])]
        if len(names) != X.shape[1]:
            raise ConfigurationError(f"{len(names)} names for {X.shape[1]} columns")
        cols = {k: X[:, j] for j, k in enumerate(names)}
    return cols


def predict(fit: RegressionFit, X) -> np.ndarray:
    cols = as_columns(X, None if isinstance(X, Mapping) else list(fit.names))
    missing = sorted(fit.variables - set(cols))
    if missing:
        raise ConfigurationError(f"design matrix lacks variables {missing}")
    return design(fit.bases, cols) @ fit.coefficients


def drop_one(X, y):
    """Residual sum of squares of ``y ~ X`` and the increase from dropping each column.

    Uses ``ΔRSS_j = β_j² / [(XᵀX)⁻¹]_jj``, which equals refitting without
    column ``j``.  ``X`` must have full column rank.
    """
    norms = np.linalg.norm(X, axis=0)
    norms[norms == 0] = 1.0
    Q, R = np.linalg.qr(X / norms)
    qy = Q.T @ y
    beta = solve_triangular(R, qy)
    resid = y - Q @ qy
    rinv = solve_triangular(R, np.eye(R.shape[0]))
    inc = beta**2 / np.sum(rinv**2, axis=1)
    return float(resid @ resid), inc


def fit_linear(X, y, ridge_penalty: float = 0.0, names=None) -> RegressionFit:
    """Least squares with an unpenalised intercept and optional ridge penalty.

    Constant columns carry no information beyond the intercept and are dropped.
    """
    if ridge_penalty < 0:
        raise ConfigurationError("ridge_penalty must be >= 0")
    cols = as_columns(X, names)
    y = np.asarray(y, dtype=float)
    n = len(y)
    used = [k for k, v in cols.items() if np.ptp(v) > 0]
    if not np.all(np.isfinite(y)) or not all(np.all(np.isfinite(cols[k])) for k in used):
        raise ConfigurationError("design matrix and response must be finite")
    ybar = y.mean()
    if used:
        Xm = np.column_stack([cols[k] for k in used])
        xbar = Xm.mean(axis=0)
        Xc = Xm - xbar
        yc = y - ybar
        if ridge_penalty > 0:
            A = Xc.T @ Xc + ridge_penalty * np.eye(len(used))
            beta = np.linalg.solve(A, Xc.T @ yc)
        else:
            if n <= len(used):
                raise NumericError("more columns than observations; use a positive ridge penalty")
            Q, R = np.linalg.qr(Xc)
            d = np.abs(np.diag(R))
            if d.min() <= 1e-10 * max(d.max(), 1e-300):
                raise NumericError("singular normal equations; use a positive ridge penalty")
            beta = solve_triangular(R, Q.T @ yc)
        intercept = ybar - xbar @ beta
    else:
        beta = np.empty(0)
        intercept = ybar
    bases = (INTERCEPT,) + tuple(BasisFunction((Factor(k),)) for k in used)
    coef = np.concatenate([[intercept], beta])
    fitted = design(bases, cols) @ coef
    kind = "ridge" if ridge_penalty > 0 else "linear"
    mse = float(np.mean((y - fitted) ** 2))
    return RegressionFit(kind, tuple(cols), bases, coef, mse, fitted,
                         {"ridge_penalty": ridge_penalty})
