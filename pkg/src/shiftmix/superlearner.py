"""Discrete Super Learner: pick the V-fold CV-best candidate and refit it."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .data import make_folds
from .errors import CandidateFailures, ConfigurationError, ShiftmixError
from .learners import RegressionFit, as_columns, fit_linear, predict
from .mars import MIN_ROWS, MarsHyper, finish, fit_mars, forward_pass

log = logging.getLogger(__name__)

KINDS = ("mean", "linear", "ridge", "mars")


@dataclass(frozen=True)
class LearnerSpec:
    name: str
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown learner kind {self.kind!r}")
        if self.kind == "mars":
            MarsHyper(**self.params)

    def to_dict(self):
        return {"name": self.name, "kind": self.kind, **self.params}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        return cls(d.pop("name"), d.pop("kind"), d)


@dataclass(frozen=True)
class LearnerGrid:
    candidates: tuple
    V: int = 5

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        if not self.candidates:
            raise ConfigurationError("learner grid is empty")
        names = [c.name for c in self.candidates]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"duplicate learner names in {names}")
        if self.V < 2:
            raise ConfigurationError("inner CV needs V >= 2")

    @property
    def names(self):
        return [c.name for c in self.candidates]

    def __add__(self, other):
        seen = set(self.names)
        extra = [c for c in other.candidates if c.name not in seen]
        return LearnerGrid(self.candidates + tuple(extra), self.V)

    def subset(self, names):
        keep = set(names)
        return LearnerGrid(tuple(c for c in self.candidates if c.name in keep), self.V)


def _mars(name, d, t, k, prune=True):
    return LearnerSpec(name, "mars", {"max_degree": d, "max_terms": t, "knot_grid_size": k, "prune": prune})


# thirteen spline configurations for discovery
MARS_GRID = LearnerGrid((
    _mars("mars_d1_k10_t11", 1, 11, 10),
    _mars("mars_d1_k10_t21", 1, 21, 10),
    _mars("mars_d1_k20_t21", 1, 21, 20),
    _mars("mars_d1_k20_t21_np", 1, 21, 20, False),
    _mars("mars_d2_k5_t21", 2, 21, 5),
    _mars("mars_d2_k10_t11", 2, 11, 10),
    _mars("mars_d2_k10_t21", 2, 21, 10),
    _mars("mars_d2_k10_t21_np", 2, 21, 10, False),
    _mars("mars_d2_k20_t11", 2, 11, 20),
    _mars("mars_d2_k20_t15", 2, 15, 20),
    _mars("mars_d2_k20_t21", 2, 21, 20),
    _mars("mars_d2_k20_t31", 2, 31, 20),
    _mars("mars_d2_k20_t31_np", 2, 31, 20, False),
))
LINEAR_GRID = LearnerGrid((LearnerSpec("linear", "linear"),
                           LearnerSpec("ridge", "ridge", {"penalty": 1.0})))
# the intercept-only candidate lets pure noise win cross-validation outright
DISCOVERY_GRID = MARS_GRID + LearnerGrid((LearnerSpec("mean", "mean"),))
OUTCOME_GRID = DISCOVERY_GRID + LINEAR_GRID
DENSITY_GRID = LearnerGrid((
    LearnerSpec("linear", "linear"),
    _mars("mars_d1_k10_t11", 1, 11, 10),
    _mars("mars_d2_k10_t21", 2, 21, 10),
))


def fit_spec(spec: LearnerSpec, X, y) -> RegressionFit:
    if spec.kind == "mean":
        cols = as_columns(X)
        return fit_linear({k: np.zeros(len(y)) for k in cols}, y)
    if spec.kind == "linear":
        return fit_linear(X, y)
    if spec.kind == "ridge":
        return fit_linear(X, y, spec.params.get("penalty", 1.0))
    return fit_mars(X, y, MarsHyper(**spec.params))


def fit_many(specs, X, y):
    """Fit several candidates; spline candidates sharing a knot grid and degree
    share one forward pass (a shorter pass is a prefix of a longer one)."""
    cols = as_columns(X)
    y = np.asarray(y, dtype=float)
    out = {}
    groups = {}
    for s in specs:
        if s.kind == "mars" and len(y) >= MIN_ROWS:
            h = MarsHyper(**s.params)
            groups.setdefault((h.max_degree, h.knot_grid_size, h.thresh), []).append((s, h))
            continue
        try:
            out[s.name] = fit_spec(s, cols, y)
        except ShiftmixError as exc:
            out[s.name] = exc
    if groups:
        names = list(cols)
        Xm = np.column_stack([cols[k] for k in names])
        for (deg, grid, thresh), members in groups.items():
            longest = max(h.max_terms for _, h in members)
            fw = forward_pass(Xm, y, names, deg, grid, longest, thresh)
            for s, h in members:
                try:
                    out[s.name] = finish(fw, y, h)
                except (ShiftmixError, np.linalg.LinAlgError) as exc:
                    out[s.name] = exc
    return out


def cv_scores(grid: LearnerGrid, X, y, seed):
    """V-fold cross-validated MSE per candidate (``inf`` for failures)."""
    cols = as_columns(X)
    y = np.asarray(y, dtype=float)
    n = len(y)
    folds = make_folds(n, min(grid.V, n), seed)
    sse = {c.name: 0.0 for c in grid.candidates}
    failures = {}
    for k in range(1, folds.K + 1):
        tr, va = folds.train(k), folds.valid(k)
        fits = fit_many(grid.candidates, {c: v[tr] for c, v in cols.items()}, y[tr])
        Xva = {c: v[va] for c, v in cols.items()}
        for name, fit in fits.items():
            if name in failures:
                continue
            if isinstance(fit, Exception):
                failures[name] = fit
                continue
            sse[name] += float(np.sum((y[va] - predict(fit, Xva)) ** 2))
    scores = {name: (np.inf if name in failures else s / n) for name, s in sse.items()}
    return scores, failures


def choose(grid: LearnerGrid, scores):
    """Lowest score; ties go to the earlier grid position."""
    best = None
    for name in grid.names:
        s = scores.get(name, np.inf)
        if np.isfinite(s) and (best is None or s < scores[best]):
            best = name
    return best


def cv_select(grid: LearnerGrid, X, y, seed, scores=None) -> RegressionFit:
    cols = as_columns(X)
    if len(grid.candidates) == 1:
        spec = grid.candidates[0]
        fit = fit_spec(spec, cols, y)
        fit.info.update(learner=spec.name, cv_mse={spec.name: None})
        return fit
    failures = {}
    if scores is None:
        scores, failures = cv_scores(grid, cols, y, seed)
    order = [n for n in grid.names if np.isfinite(scores.get(n, np.inf))]
    order.sort(key=lambda n: (scores[n], grid.names.index(n)))
    for name in order:
        spec = grid.candidates[grid.names.index(name)]
        try:
            fit = fit_spec(spec, cols, y)
        except ShiftmixError as exc:
            failures[name] = exc
            continue
        fit.info.update(learner=name, cv_mse={n: scores.get(n) for n in grid.names})
        return fit
    raise CandidateFailures({n: failures.get(n, "no finite CV score") for n in grid.names})
