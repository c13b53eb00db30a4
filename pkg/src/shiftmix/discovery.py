"""Variance decomposition of a fitted basis expansion into exposure-set scores."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .basis import BasisFunction, design
from .errors import ConfigurationError
from .learners import RegressionFit, as_columns, drop_one

_PIVOT_TOL = 1e-10


@dataclass(frozen=True)
class VariableSetScore:
    exposure_set: tuple  # sorted exposure names
    f_sum: float
    n_bases: int


def exposure_set(basis: BasisFunction, exposures) -> frozenset:
    """Exposure members of a basis; covariate factors are ignored."""
    return frozenset(v for v in basis.variable_set if v in exposures)


def extract_bases(fit: RegressionFit) -> list:
    """Non-intercept bases with nonzero coefficients, in model order."""
    return [b for b, c in zip(fit.bases, fit.coefficients) if not b.is_intercept and c != 0.0]


def independent_columns(M, tol=_PIVOT_TOL):
    """Greedy left-to-right selection of linearly independent columns."""
    keep = []
    Q = np.empty((M.shape[0], 0))
    for j in range(M.shape[1]):
        c = M[:, j]
        nc = np.linalg.norm(c)
        if nc == 0:
            continue
        u = c - Q @ (Q.T @ c)
        u -= Q @ (Q.T @ u)
        nu = np.linalg.norm(u)
        if nu > tol * nc:
            keep.append(j)
            Q = np.column_stack([Q, u / nu])
    return keep


def type3_f(bases, X, y) -> dict:
    """Drop-one F statistic for each basis in a linear model with intercept.

    ``F_j = (SSE_without_j - SSE_full) / (SSE_full / (n - p))`` where ``p``
    counts the intercept.  A perfect fit yields ``inf``.  Exactly collinear
    later bases are dropped (with a warning) and get no entry.
    """
    cols = as_columns(X)
    y = np.asarray(y, dtype=float)
    bases = [b for b in bases if not b.is_intercept]
    n = len(y)
    M = np.column_stack([np.ones(n), design(bases, cols)]) if bases else np.ones((n, 1))
    keep = independent_columns(M)
    if keep[:1] != [0]:
        raise ConfigurationError("intercept column is degenerate")
    if len(keep) < M.shape[1]:
        dropped = [bases[j - 1].label() for j in range(1, M.shape[1]) if j not in keep]
        warnings.warn(f"dropping collinear bases before testing: {dropped}", stacklevel=2)
    p = len(keep)
    if n <= p:
        raise ConfigurationError(f"need more rows ({n}) than model terms ({p})")
    rss, inc = drop_one(M[:, keep], y)
    scale = float(np.sum((y - y.mean()) ** 2)) or 1.0
    out = {}
    for pos, j in enumerate(keep[1:], start=1):
        b = bases[j - 1]
        if rss <= 1e-24 * scale:
            out[b] = math.inf
        else:
            out[b] = max(0.0, float(inc[pos]) / (rss / (n - p)))
    return out


def _type7_quantile(sorted_vals, q):
    """Type-7 empirical quantile that tolerates ``inf`` entries."""
    h = (len(sorted_vals) - 1) * q
    lo = int(math.floor(h))
    frac = h - lo
    a = sorted_vals[lo]
    if frac == 0 or lo + 1 >= len(sorted_vals):
        return a
    b = sorted_vals[lo + 1]
    if math.isinf(b):
        return b
    return a + frac * (b - a)


def aggregate_and_threshold(fmap: dict, bases, exposures, quantile: float = 0.0) -> list:
    """Sum F per exposure set and keep sets at or above the given quantile.

    The quantile is taken jointly over singleton and pair sets.
    """
    if not 0.0 <= quantile <= 1.0:
        raise ConfigurationError("quantile must lie in [0, 1]")
    exposures = set(exposures)
    sums, counts = {}, {}
    for b in bases:
        if b not in fmap:
            continue
        s = exposure_set(b, exposures)
        if not s:
            continue
        if len(s) > 2:
            raise ConfigurationError(f"basis {b.label()} spans more than two exposures")
        key = tuple(sorted(s))
        sums[key] = sums.get(key, 0.0) + fmap[b]
        counts[key] = counts.get(key, 0) + 1
    if not sums:
        return []
    threshold = _type7_quantile(sorted(sums.values()), quantile)
    keys = sorted(sums, key=lambda k: (len(k), k))
    return [VariableSetScore(k, sums[k], counts[k]) for k in keys if sums[k] >= threshold]


def discover(fit: RegressionFit, X, y, exposures, quantile=0.0):
    """Extract bases, test each with a drop-one F, aggregate and threshold."""
    bases = extract_bases(fit)
    if not bases:
        return [], {}
    fmap = type3_f(bases, X, y)
    return aggregate_and_threshold(fmap, bases, exposures, quantile), fmap
