"""MARS-style adaptive regression splines.

The forward pass greedily adds linear terms and reflected hinge pairs
(optionally multiplied into an existing degree-1 basis); the backward pass
prunes terms by generalized cross-validation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .basis import INTERCEPT, BasisFunction, Factor, design
from .errors import ConfigurationError
from .learners import RegressionFit, as_columns, drop_one, fit_linear

MIN_ROWS = 20
_TOL = 1e-9


@dataclass(frozen=True)
class MarsHyper:
    max_degree: int = 2
    max_terms: int = 21
    knot_grid_size: int = 10
    prune: bool = True
    penalty: float = 3.0  # GCV cost per knot
    thresh: float = 1e-3  # minimum R^2 gain per forward step

    def __post_init__(self):
        if self.max_degree not in (1, 2):
            raise ConfigurationError("max_degree must be 1 or 2")
        if self.max_terms < 2:
            raise ConfigurationError("max_terms must be >= 2")
        if self.knot_grid_size < 3:
            raise ConfigurationError("knot_grid_size must be >= 3")


@dataclass
class ForwardPass:
    names: list
    bases: list
    B: np.ndarray  # evaluated bases, one column each
    step_sizes: list  # columns added per accepted step
    mse: list = field(default_factory=list)  # training MSE after each step

    def truncated(self, max_terms):
        m, k = 1, 0
        while k < len(self.step_sizes) and m + self.step_sizes[k] <= max_terms:
            m += self.step_sizes[k]
            k += 1
        return self.bases[:m], self.B[:, :m], self.mse[: k + 1]


def candidate_knots(x, grid_size):
    """Interior empirical quantiles (observed values); never the minimum or maximum."""
    lo, hi = x.min(), x.max()
    if not hi > lo:
        return np.empty(0)
    # knots sit on observed values, so a binary variable gets none
    q = np.unique(np.quantile(x, np.arange(1, grid_size + 1) / (grid_size + 1), method="lower"))
    return q[(q > lo) & (q < hi)]


def _orthonormalize(c, Q):
    u = c.copy()
    for _ in range(2):
        u -= Q @ (Q.T @ u)
    nu = np.linalg.norm(u)
    if nu <= 1e-8 * np.linalg.norm(c):
        return None
    return u / nu


def forward_pass(X, y, names, max_degree, knot_grid_size, max_terms,
                 thresh=1e-3, scan=None) -> ForwardPass:
    scan = scan or _kernels.scan
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable"))
    center = X.mean(axis=0)
    xc = X - center
    knots = [candidate_knots(X[:, v], knot_grid_size) for v in range(p)]
    G = max(1, max(len(k) for k in knots))
    knot_val = np.zeros((p, G))
    knot_pos = np.zeros((p, G), dtype=np.int64)
    n_knots = np.zeros(p, dtype=np.int64)
    for v, kv in enumerate(knots):
        n_knots[v] = len(kv)
        knot_val[v, : len(kv)] = kv - center[v]
        knot_pos[v, : len(kv)] = np.searchsorted(X[order[:, v], v], kv, side="right")
    varying = np.ptp(X, axis=0) > 0

    cap = max_terms
    B = np.zeros((n, cap))
    Q = np.zeros((n, cap))
    B[:, 0] = 1.0
    Q[:, 0] = 1.0 / np.sqrt(n)
    bases = [INTERCEPT]
    r = y - y.mean()
    tss = float(r @ r)
    rss = tss
    mse = [rss / n]
    steps = []
    m = 1
    while m < cap and tss > 0 and rss > (1.0 - 0.999) * tss:
        parent_ok = np.array([b.degree < max_degree for b in bases[:m]])
        var_ok = np.zeros((m, p), dtype=np.bool_)
        for j in range(m):
            used = bases[j].variable_set
            var_ok[j] = varying & np.array([nm not in used for nm in names])
        red, j, v, kind, g, sides = scan(xc, order, knot_pos, knot_val, n_knots, B[:, :m],
                                         parent_ok, var_ok, Q[:, :m], r, False, _TOL)
        if j < 0 or red < thresh * tss:
            break
        if kind == _kernels.LINEAR:
            new = [Factor(names[v])]
        else:
            t = knots[v][g]
            new = []
            if sides & 1:
                new.append(Factor(names[v], "hinge", float(t), 1))
            if sides & 2:
                new.append(Factor(names[v], "hinge", float(t), -1))
        if m + len(new) > cap:
            break
        added = 0
        for f in new:
            c = B[:, j] * f.evaluate(X[:, v])
            u = _orthonormalize(c, Q[:, : m + added])
            if u is None:
                continue
            B[:, m + added] = c
            Q[:, m + added] = u
            r -= u * (u @ r)
            bases.append(bases[j].times(f))
            added += 1
        if added == 0:
            break
        m += added
        steps.append(added)
        rss = float(r @ r)
        mse.append(rss / n)
    return ForwardPass(list(names), bases[:m], B[:, :m].copy(), steps, mse)


def gcv(rss, n, n_terms, penalty):
    c = n_terms + penalty * (n_terms - 1) / 2.0
    if c >= n:
        return np.inf
    return rss / n / (1.0 - c / n) ** 2


def backward_prune(B, y, penalty):
    """Indices of the GCV-best nested subset (the intercept is never removed)."""
    n, M = B.shape
    active = list(range(M))
    rss, _ = drop_one(B, y)
    best_score, best = gcv(rss, n, M, penalty), list(active)
    while len(active) > 1:
        rss, inc = drop_one(B[:, active], y)
        k = 1 + int(np.argmin(inc[1:]))
        rss += inc[k]
        del active[k]
        score = gcv(rss, n, len(active), penalty)
        if score <= best_score:
            best_score, best = score, list(active)
    return best


def finish(fw: ForwardPass, y, hyper: MarsHyper) -> RegressionFit:
    bases, B, mse_path = fw.truncated(hyper.max_terms)
    keep = backward_prune(B, y, hyper.penalty) if hyper.prune else list(range(len(bases)))
    Bk = B[:, keep]
    coef, *_ = np.linalg.lstsq(Bk, y, rcond=None)
    fitted = Bk @ coef
    return RegressionFit(
        "mars", tuple(fw.names), tuple(bases[i] for i in keep), coef,
        float(np.mean((y - fitted) ** 2)), fitted,
        {"hyper": hyper, "forward_mse": list(mse_path), "n_forward_terms": len(bases)},
    )


def fit_mars(X, y, hyper: MarsHyper = MarsHyper(), names=None) -> RegressionFit:
    cols = as_columns(X, names)
    y = np.asarray(y, dtype=float)
    if len(y) < MIN_ROWS:
        return fit_linear(cols, y)
    names = list(cols)
    Xm = np.column_stack([cols[k] for k in names])
    fw = forward_pass(Xm, y, names, hyper.max_degree, hyper.knot_grid_size,
                      hyper.max_terms, hyper.thresh)
    return finish(fw, y, hyper)
