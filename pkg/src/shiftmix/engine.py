"""Cross-validated discovery and estimation.

For each fold the training rows drive discovery, the nuisance fits and the
choice of shift size; the validation rows only receive predictions.  Pooled
estimates run one targeting step on the stacked validation quantities of all
folds in which a variable set was found.
"""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .config import Config
from .data import Dataset, ScalingRecord, ShiftSpec, derive_seed, make_folds, scale_outcome
from .density import fit_cond_density, fit_joint_density, log_ratio, density_ratio
from .discovery import discover
from .errors import ConfigurationError, NumericError, PositivityError
from .learners import predict
from .superlearner import choose, cv_scores, cv_select
from .tmle import TmleEstimate, contrast, estimate_interaction, estimate_mean_y, target_shift, wald

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MAX_REDUCTIONS = 100


# ---------------------------------------------------------------- results


@dataclass(frozen=True)
class EstimateRow:
    exposure_set: tuple
    kind: str
    target: tuple
    psi: float
    se: float
    ci: tuple
    p_value: float
    n_capped: int = 0

    @classmethod
    def from_estimate(cls, key, est: TmleEstimate):
        s, kind, target = key
        return cls(s, kind, target, est.psi, est.se, tuple(est.ci), est.p_value, est.n_capped)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for k in ("exposure_set", "target", "ci"):
            d[k] = tuple(d[k])
        return cls(**d)


@dataclass
class Component:
    """Validation-row initial quantities for one shift."""

    q_shift: np.ndarray
    h_obs: np.ndarray
    h_shift: np.ndarray
    n_capped: int


@dataclass
class FoldData:
    rows: np.ndarray
    y: np.ndarray
    q_obs: np.ndarray
    components: dict  # target tuple -> Component


@dataclass
class FoldResult:
    fold: int
    selected_sets: list
    estimates: dict  # (set, kind, target) -> EstimateRow
    delta_used: dict
    diagnostics: dict = field(default_factory=dict)
    data: Optional[FoldData] = field(default=None, repr=False, compare=False)

    def to_dict(self):
        return {
            "fold": self.fold,
            "selected_sets": [list(s) for s in self.selected_sets],
            "estimates": [_row_dict(r) for r in self.estimates.values()],
            "delta_used": dict(self.delta_used),
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, d):
        rows = [EstimateRow.from_dict(r) for r in d["estimates"]]
        return cls(d["fold"], [tuple(s) for s in d["selected_sets"]],
                   {(r.exposure_set, r.kind, r.target): r for r in rows},
                   dict(d["delta_used"]), d.get("diagnostics", {}))


@dataclass(frozen=True)
class PooledResult:
    exposure_set: tuple
    kind: str
    target: tuple
    psi: float
    se: float
    ci: tuple
    p_value: float
    n_folds_found: int
    n_folds_total: int
    delta_pooled: dict
    pooling_mode: str = "plain"
    n_rows: int = 0

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for k in ("exposure_set", "target", "ci"):
            d[k] = tuple(d[k])
        return cls(**d)

    @property
    def proportion(self):
        return self.n_folds_found / self.n_folds_total


def _row_dict(r):
    d = asdict(r)
    for k in ("exposure_set", "target", "ci"):
        d[k] = list(d[k])
    return d


@dataclass
class AnalysisReport:
    pooled: list
    folds: list
    config: dict
    seed: int
    schema_version: int = SCHEMA_VERSION

    def to_dict(self):
        return {
            "schema_version": self.schema_version,
            "seed": self.seed,
            "config": self.config,
            "pooled": [_row_dict(p) for p in self.pooled],
            "folds": [f.to_dict() for f in self.folds],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d):
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ConfigurationError(f"unsupported report schema {d.get('schema_version')}")
        return cls([PooledResult.from_dict(p) for p in d["pooled"]],
                   [FoldResult.from_dict(f) for f in d["folds"]],
                   d["config"], d["seed"], d["schema_version"])

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def find(self, exposure_set, kind, target=None, mode="plain"):
        exposure_set = tuple(sorted(exposure_set))
        target = tuple(target) if target is not None else exposure_set
        for p in self.pooled:
            if (p.exposure_set, p.kind, p.target, p.pooling_mode) == (exposure_set, kind, target, mode):
                return p
        return None


# ---------------------------------------------------------------- operations


def adapt_delta(g, rows, delta0, lam=50.0, reduce_frac=0.1) -> float:
    """Largest ``delta0 * (1 - reduce_frac)**j`` whose density ratios stay below ``lam``."""
    if delta0 == 0:
        raise ConfigurationError("initial delta must be nonzero")
    if not 0.0 < reduce_frac < 1.0:
        raise ConfigurationError("reduce_frac must lie in (0, 1)")
    name = g.targets[0]
    cols = rows.columns if hasattr(rows, "columns") else rows
    d = float(delta0)
    for _ in range(MAX_REDUCTIONS + 1):
        if math.isinf(lam):
            return d
        lr = log_ratio(g, cols, ShiftSpec((name,), {name: d}))
        if np.max(lr) <= math.log(lam):
            return d
        d *= 1.0 - reduce_frac
    raise PositivityError(f"no admissible shift for exposure {name!r} after {MAX_REDUCTIONS} reductions")


def set_targets(s):
    if len(s) == 1:
        return [s]
    return [(s[0],), (s[1],), s]


def estimate_set(s, bundles, base: ScalingRecord, binary, deltas):
    """Fold-specific (one bundle) or pooled (several) estimates for one variable set."""
    y = np.concatenate([b.y for b in bundles])
    q_obs = np.concatenate([b.q_obs for b in bundles])
    comps = {}
    for t in set_targets(s):
        parts = [b.components[t] for b in bundles]
        comps[t] = Component(*(np.concatenate([getattr(p, a) for p in parts])
                               for a in ("q_shift", "h_obs", "h_shift")),
                             sum(p.n_capped for p in parts))
    scaling = base if binary else base.covering(y, q_obs, *(c.q_shift for c in comps.values()))
    mean_y = estimate_mean_y(y)
    levels = {}
    out = {}
    for t, c in comps.items():
        kind = "individual" if len(t) == 1 else "joint"
        shift = ShiftSpec(t, {e: deltas[e] for e in t})
        levels[t] = target_shift(y, q_obs, c.q_shift, c.h_obs, c.h_shift, scaling, kind, shift,
                                 c.n_capped)
        out[(s, kind, t)] = contrast(levels[t], mean_y, kind)
    if len(s) == 2:
        out[(s, "interaction", s)] = estimate_interaction(levels[s], levels[(s[0],)],
                                                          levels[(s[1],)], mean_y)
    return out


def _component(q_fit, g, cols, shift, lam):
    q_shift = predict(q_fit, shift.apply(cols))
    h_obs = density_ratio(g, cols, shift, lam)
    h_shift = density_ratio(g, cols, shift, lam, at_shifted=True)
    return Component(q_shift, h_obs.values, h_shift.values, h_obs.n_capped)


def _discover_and_fit_q(train: Dataset, config: Config, seed):
    X = train.features()
    y = train.y
    diag = {}
    if config.var_sets is not None:
        q_fit = cv_select(config.outcome_grid, X, y, seed)
        selected = [s for s in config.var_sets]
        diag["set_scores"] = []
    else:
        union = config.discovery_grid + config.outcome_grid
        scores, _ = cv_scores(union, X, y, seed)
        q_fit = cv_select(config.outcome_grid, X, y, seed, scores=scores)
        best = choose(config.discovery_grid, scores)
        if best is None:
            disc_fit = cv_select(config.discovery_grid, X, y, seed, scores=scores)
        elif q_fit.info.get("learner") == best:
            disc_fit = q_fit
        else:
            disc_fit = cv_select(config.discovery_grid.subset([best]), X, y, seed)
        found, _ = discover(disc_fit, X, y, train.exposures, config.f_quantile)
        selected = [v.exposure_set for v in found]
        diag["discovery_learner"] = disc_fit.info.get("learner")
        diag["set_scores"] = [{"exposure_set": list(v.exposure_set), "f_sum": v.f_sum,
                               "n_bases": v.n_bases} for v in found]
    diag["outcome_learner"] = q_fit.info.get("learner")
    return q_fit, selected, diag


def run_fold(k, dataset: Dataset, folds, config: Config, seed) -> FoldResult:
    if not 1 <= k <= folds.K:
        raise ConfigurationError(f"fold index {k} outside 1..{folds.K}")
    train = dataset.take(folds.train(k))
    valid = dataset.take(folds.valid(k))
    fseed = derive_seed(seed, k)
    q_fit, selected, diag = _discover_and_fit_q(train, config, fseed)
    if not selected:
        return FoldResult(k, [], {}, {}, diag)

    exposures, covariates = dataset.exposures, dataset.covariates
    needed = sorted({e for s in selected for e in s})
    g_ind, delta = {}, {}
    for i, e in enumerate(needed):
        ctx = {c: train[c] for c in covariates + exposures if c != e}
        g_ind[e] = fit_cond_density(train[e], ctx, config.density_kind, config.density_grid,
                                    derive_seed(fseed, 1, i), target=e)
        delta[e] = adapt_delta(g_ind[e], train, config.delta_for(e), config.lam, config.reduce_frac)
    pairs = [s for s in selected if len(s) == 2]
    g_joint = {}
    for i, (e1, e2) in enumerate(pairs):
        ctx = {c: train[c] for c in covariates + exposures if c not in (e1, e2)}
        g_joint[(e1, e2)] = fit_joint_density(train[e1], train[e2], ctx, config.density_kind,
                                              config.density_grid, derive_seed(fseed, 2, i), (e1, e2))

    vcols = dict(valid.columns)
    comps = {}
    for e in needed:
        comps[(e,)] = _component(q_fit, g_ind[e], vcols, ShiftSpec((e,), {e: delta[e]}), config.lam)
    for s in pairs:
        comps[s] = _component(q_fit, g_joint[s], vcols, ShiftSpec(s, {e: delta[e] for e in s}),
                              config.lam)
    data = FoldData(folds.valid(k), valid.y, predict(q_fit, vcols), comps)
    _, base = _base_scaling(dataset)
    estimates = {}
    for s in selected:
        for key, est in estimate_set(s, [data], base, dataset.binary, delta).items():
            estimates[key] = EstimateRow.from_estimate(key, est)
    diag["n_capped"] = {"+".join(t): c.n_capped for t, c in comps.items()}
    diag["density_learners"] = {e: g.mean_fit.info.get("learner") for e, g in g_ind.items()}
    return FoldResult(k, list(selected), estimates, delta, diag, data)


def _base_scaling(dataset):
    if dataset.binary:
        return dataset, ScalingRecord(0.0, 1.0)
    y = dataset.y
    return dataset, ScalingRecord(float(y.min()), float(y.max()))


def pool(fold_results, dataset: Dataset, scaling: ScalingRecord = None) -> list:
    if scaling is None:
        _, scaling = _base_scaling(dataset)
    K = len(fold_results)
    sets = sorted({s for fr in fold_results for s in fr.selected_sets}, key=lambda s: (len(s), s))
    out = []
    for s in sets:
        found = [fr for fr in fold_results if s in fr.selected_sets]
        deltas = {e: float(np.mean([fr.delta_used[e] for fr in found])) for e in s}
        ests = estimate_set(s, [fr.data for fr in found], scaling, dataset.binary, deltas)
        for (_, kind, target), est in ests.items():
            out.append(PooledResult(s, kind, target, est.psi, est.se, tuple(est.ci), est.p_value,
                                    len(found), K, deltas, "plain", len(est.eif)))
    return out


def pool_with_null(pooled: PooledResult, n0: int, n1: int) -> PooledResult:
    """Inverse-variance blend of the pooled estimate with an implied null of 0."""
    if n0 < 1:
        return pooled
    if n1 < 1:
        raise ConfigurationError("n1 must be >= 1")
    var = pooled.se ** 2
    if not var > 0:
        raise NumericError("cannot blend a zero-variance estimate with the null")
    var_null = var * n1 / n0
    w1, w0 = 1.0 / var, 1.0 / var_null
    psi = (w1 * pooled.psi + w0 * 0.0) / (w0 + w1)
    se = math.sqrt(1.0 / (w0 + w1))
    ci, p = wald(psi, se)
    return PooledResult(pooled.exposure_set, pooled.kind, pooled.target, psi, se, ci, p,
                        pooled.n_folds_found, pooled.n_folds_total, pooled.delta_pooled,
                        "inverse_variance_null", pooled.n_rows)


def run(dataset: Dataset, config: Config, seed=None) -> AnalysisReport:
    seed = config.seed if seed is None else seed
    for e in config.var_sets or ():
        for name in e:
            if dataset.roles.get(name) != "exposure":
                raise ConfigurationError(f"variable set member {name!r} is not an exposure")
    scale_outcome(dataset)  # rejects a constant outcome up front
    folds = make_folds(dataset.n, config.folds, seed)
    ks = range(1, folds.K + 1)
    if config.threads > 1:
        with ThreadPoolExecutor(config.threads) as ex:
            results = list(ex.map(lambda k: run_fold(k, dataset, folds, config, seed), ks))
    else:
        results = [run_fold(k, dataset, folds, config, seed) for k in ks]
    pooled = pool(results, dataset)
    rows = []
    for p in pooled:
        rows.append(p)
        if p.n_folds_found < p.n_folds_total:
            rows.append(pool_with_null(p, p.n_folds_total - p.n_folds_found, p.n_folds_found))
    return AnalysisReport(rows, results, config.to_dict(), int(seed))


def format_table(report: AnalysisReport) -> str:
    head = f"{'set':<12} {'kind':<12} {'target':<10} {'mode':<8} {'psi':>10} {'se':>10} " \
           f"{'ci_lo':>10} {'ci_hi':>10} {'p':>10} {'found':>6}"
    lines = [head, "-" * len(head)]
    for p in report.pooled:
        mode = "plain" if p.pooling_mode == "plain" else "ivnull"
        lines.append(
            f"{'-'.join(p.exposure_set):<12} {p.kind:<12} {'-'.join(p.target):<10} {mode:<8} "
            f"{p.psi:>10.4g} {p.se:>10.4g} {p.ci[0]:>10.4g} {p.ci[1]:>10.4g} {p.p_value:>10.4g} "
            f"{p.n_folds_found:>3}/{p.n_folds_total:<2}")
    return "\n".join(lines)
