"""Simulation design with a known answer, Monte-Carlo truths, convergence
metrics and the quantile g-computation baseline."""
from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .config import Config
from .data import Dataset, ShiftSpec, derive_seed, make_dataset
from .errors import ConfigurationError, ShiftmixError

log = logging.getLogger(__name__)

W_MEAN = np.array([6.0, 7.0])
W_COV = np.array([[1.0, 0.4], [0.4, 1.0]])
A_COV = np.array([[1.0, 0.5, 0.8], [0.5, 1.0, 0.7], [0.8, 0.7, 1.0]])
A4_MEAN, A4_VAR = 4.0, 2.0
ROLES = {"W1": "covariate", "W2": "covariate", "W3": "covariate",
         "A1": "exposure", "A2": "exposure", "A3": "exposure", "A4": "exposure",
         "Y": "outcome"}
MC_CHUNK = 1_000_000


@dataclass(frozen=True)
class DgpSample:
    dataset: Dataset
    seed: int


def _draw(n, rng):
    w12 = rng.multivariate_normal(W_MEAN, W_COV, size=n)
    w3 = rng.binomial(1, 0.5, size=n).astype(float)
    mu = np.column_stack([np.exp(w12[:, 0] / 2), w12[:, 1] / 2, np.full(n, 5.0)])
    a = mu + rng.multivariate_normal(np.zeros(3), A_COV, size=n)
    a4 = rng.normal(A4_MEAN, math.sqrt(A4_VAR), size=n)
    eps = rng.normal(size=n)
    return w12[:, 0], w12[:, 1], w3, a[:, 0], a[:, 1], a[:, 2], a4, eps


def outcome(w1, w2, w3, a1, a3, a4, eps):
    a3_term = np.where(w3 == 1, a3 * a3, a3)
    return 1.3 * a4 + 0.4 * a4 * a1 + 0.1 * w1 + 0.3 * w2 + eps + a3_term


def gen_dgp(n: int, seed: int) -> DgpSample:
    if n < 1:
        raise ConfigurationError("n must be positive")
    w1, w2, w3, a1, a2, a3, a4, eps = _draw(n, np.random.default_rng(seed))
    y = outcome(w1, w2, w3, a1, a3, a4, eps)
    cols = {"W1": w1, "W2": w2, "W3": w3, "A1": a1, "A2": a2, "A3": a3, "A4": a4, "Y": y}
    return DgpSample(make_dataset(cols, ROLES, binary=False), seed)


# ---------------------------------------------------------------- truths


@dataclass(frozen=True)
class TruthRequest:
    """A shift contrast ``E[Y(a + delta)] - E[Y]`` or, with ``interaction``,
    the joint contrast minus both single-exposure contrasts."""

    shift: ShiftSpec
    interaction: bool = False

    def __post_init__(self):
        if self.interaction and len(self.shift.targets) != 2:
            raise ConfigurationError("an interaction needs two shifted exposures")

    def key(self):
        parts = [f"{t}={self.shift.delta[t]!r}" for t in sorted(self.shift.targets)]
        return ("interaction:" if self.interaction else "shift:") + ",".join(parts)


def _mc_contrasts(request: TruthRequest, N_mc: int, seed: int):
    """Per-draw counterfactual contrasts, accumulated chunk by chunk as (sum, sum of squares)."""
    total, total_sq, done, chunk_id = 0.0, 0.0, 0, 0
    d = dict(request.shift.delta)
    while done < N_mc:
        m = min(MC_CHUNK, N_mc - done)
        w1, w2, w3, a1, a2, a3, a4, eps = _draw(m, np.random.default_rng(derive_seed(seed, chunk_id)))
        base = {"A1": a1, "A2": a2, "A3": a3, "A4": a4}

        def y_under(shifted):
            a = dict(base)
            for t in shifted:
                a[t] = a[t] + d[t]
            return outcome(w1, w2, w3, a["A1"], a["A3"], a["A4"], eps)

        y0 = y_under(())
        if request.interaction:
            t1, t2 = request.shift.targets
            c = y_under((t1, t2)) - y_under((t1,)) - y_under((t2,)) + y0
        else:
            c = y_under(request.shift.targets) - y0
        total += float(c.sum())
        total_sq += float((c * c).sum())
        done += m
        chunk_id += 1
    mean = total / N_mc
    var = max(total_sq / N_mc - mean * mean, 0.0)
    return mean, math.sqrt(var / N_mc)


def ground_truth(request, N_mc: int = 10_000_000, seed: int = 0, cache: Optional[str] = None,
                 with_se: bool = False):
    """Monte-Carlo value of a shift contrast under the simulation design.

    Outcomes are regenerated under the shifted exposures with every noise
    draw held fixed.  ``cache`` names a JSON file of previously computed values.
    """
    if isinstance(request, ShiftSpec):
        request = TruthRequest(request)
    for t in request.shift.targets:
        if ROLES.get(t) != "exposure":
            raise ConfigurationError(f"{t!r} is not an exposure of the simulation design")
    if N_mc < 1:
        raise ConfigurationError("N_mc must be positive")
    key = f"{request.key()}|N={N_mc}|seed={seed}"
    store = {}
    if cache and os.path.exists(cache):
        with open(cache, encoding="utf-8") as fh:
            store = json.load(fh)
    if key in store:
        mean, se = store[key]["value"], store[key]["mc_se"]
    else:
        mean, se = _mc_contrasts(request, N_mc, seed)
        if cache:
            store[key] = {"value": mean, "mc_se": se}
            with open(cache, "w", encoding="utf-8") as fh:
                json.dump(store, fh, indent=2, sort_keys=True)
    return (mean, se) if with_se else mean


@dataclass(frozen=True)
class UnitTruths:
    """Contrasts at unit shifts.  The outcome is linear in A1 and in A4
    separately, so the truth at any shift sizes follows from these three."""

    a1: float
    a4: float
    a1a4: float

    @classmethod
    def compute(cls, N_mc=2_000_000, seed=0, cache=None):
        one = lambda *ts: ShiftSpec(ts, {t: 1.0 for t in ts})
        return cls(ground_truth(one("A1"), N_mc, seed, cache),
                   ground_truth(one("A4"), N_mc, seed, cache),
                   ground_truth(TruthRequest(one("A1", "A4"), True), N_mc, seed, cache))

    def at(self, kind, d1=1.0, d4=1.0):
        if kind == "A1":
            return self.a1 * d1
        if kind == "A4":
            return self.a4 * d4
        if kind == "joint":
            return self.a1 * d1 + self.a4 * d4 + self.a1a4 * d1 * d4
        if kind == "interaction":
            return self.a1a4 * d1 * d4
        raise ConfigurationError(f"unknown parameter {kind!r}")


# ---------------------------------------------------------------- convergence

PARAMETERS = ("A4", "A1", "joint", "interaction")
METRIC_FIELDS = ("n", "kind", "bias", "variance", "mse_times_n", "coverage", "discovery_rate",
                 "n_estimates", "failures", "abs_bias_root_n")


@dataclass(frozen=True)
class MetricsRow:
    n: int
    kind: str
    bias: float
    variance: float
    mse_times_n: float
    coverage: float
    discovery_rate: float
    n_estimates: int
    failures: int

    @property
    def abs_bias_root_n(self):
        return abs(self.bias) * math.sqrt(self.n)

    def to_dict(self):
        d = asdict(self)
        d["abs_bias_root_n"] = self.abs_bias_root_n
        return d


@dataclass
class ReplicateResult:
    n: int
    rep: int
    estimates: dict = field(default_factory=dict)  # kind -> (psi, lo, hi, truth)
    discovery: dict = field(default_factory=dict)  # kind -> fraction of folds containing its set
    error: Optional[str] = None


def _param_row(report, kind):
    if kind in ("A1", "A4"):
        # the pair's own single-exposure row stands in when the singleton was not requested
        return (report.find((kind,), "individual")
                or report.find(("A1", "A4"), "individual", (kind,)))
    if kind == "joint":
        return report.find(("A1", "A4"), "joint")
    return report.find(("A1", "A4"), "interaction")


def run_replicate(n, rep, config: Config, seed, truths: UnitTruths) -> ReplicateResult:
    from .engine import run

    out = ReplicateResult(n, rep)
    try:
        sample = gen_dgp(n, derive_seed(seed, n, rep))
        report = run(sample.dataset, config, derive_seed(seed, n, rep, 1))
    except ShiftmixError as exc:
        out.error = f"{type(exc).__name__}: {exc}"
        log.warning("replicate n=%d rep=%d failed: %s", n, rep, exc)
        return out
    K = len(report.folds)
    for kind in PARAMETERS:
        if kind in ("A1", "A4"):
            hit = [any(kind in s for s in f.selected_sets) for f in report.folds]
        else:
            hit = [("A1", "A4") in f.selected_sets for f in report.folds]
        out.discovery[kind] = sum(hit) / K
        row = _param_row(report, kind)
        if row is None:
            continue
        d1 = row.delta_pooled.get("A1", 1.0)
        d4 = row.delta_pooled.get("A4", 1.0)
        out.estimates[kind] = (row.psi, row.ci[0], row.ci[1], truths.at(kind, d1, d4))
    return out


def summarize(results, ns) -> list:
    rows = []
    for n in ns:
        reps = [r for r in results if r.n == n]
        failures = sum(r.error is not None for r in reps)
        ok = [r for r in reps if r.error is None]
        for kind in PARAMETERS:
            est = np.array([r.estimates[kind] for r in ok if kind in r.estimates]).reshape(-1, 4)
            disc = float(np.mean([r.discovery[kind] for r in ok])) if ok else float("nan")
            if len(est):
                err = est[:, 0] - est[:, 3]
                bias = float(err.mean())
                variance = float(est[:, 0].var())
                cover = float(np.mean((est[:, 1] <= est[:, 3]) & (est[:, 3] <= est[:, 2])))
            else:
                bias = variance = cover = float("nan")
            rows.append(MetricsRow(n, kind, bias, variance, n * (bias * bias + variance), cover,
                                   disc, len(est), failures))
    return rows


def run_convergence(ns, reps: int, config: Config, seed: int = 0, truths: UnitTruths = None,
                    threads: int = 1, return_replicates=False):
    if reps < 2:
        raise ConfigurationError("need at least 2 replicates")
    truths = truths or UnitTruths.compute(seed=seed)
    jobs = [(n, r) for n in ns for r in range(reps)]
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(lambda j: run_replicate(j[0], j[1], config, seed, truths), jobs))
    else:
        results = [run_replicate(n, r, config, seed, truths) for n, r in jobs]
    rows = summarize(results, ns)
    return (rows, results) if return_replicates else rows


def write_metrics_csv(rows, path_or_file):
    own = isinstance(path_or_file, (str, os.PathLike))
    fh = open(path_or_file, "w", newline="", encoding="utf-8") if own else path_or_file
    try:
        w = csv.DictWriter(fh, fieldnames=METRIC_FIELDS)
        w.writeheader()
        for r in rows:
            w.writerow(r.to_dict())
    finally:
        if own:
            fh.close()


# ---------------------------------------------------------------- qgcomp


@dataclass(frozen=True)
class QgcompResult:
    psi_pos: float
    psi_neg: float
    psi_total: float
    se_total: float
    coefficients: dict
    weights: dict

    def to_dict(self):
        return asdict(self)


def quantize(x, q: int, name="x"):
    """Quantile index 0..q-1 using type-7 cut points; values on a cut go to the lower bin."""
    x = np.asarray(x, dtype=float)
    if len(np.unique(x)) < q:
        raise ConfigurationError(f"exposure {name!r} has fewer than {q} distinct values")
    cuts = np.quantile(x, np.arange(1, q) / q)
    return np.searchsorted(cuts, x, side="left").astype(float)


def qgcomp_baseline(dataset: Dataset, q: int = 4) -> QgcompResult:
    if q < 2:
        raise ConfigurationError("q must be at least 2")
    ex, cov = dataset.exposures, dataset.covariates
    cols = [np.ones(dataset.n)] + [quantize(dataset[e], q, e) for e in ex] + [dataset[c] for c in cov]
    X = np.column_stack(cols)
    y = dataset.y
    beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < X.shape[1]:
        raise ConfigurationError("quantized design is rank deficient")
    coef = {e: float(b) for e, b in zip(ex, beta[1:1 + len(ex)])}
    resid = y - X @ beta
    dof = dataset.n - X.shape[1]
    sigma2 = float(resid @ resid) / dof if dof > 0 else float("nan")
    cov_b = sigma2 * np.linalg.inv(X.T @ X)
    idx = np.arange(1, 1 + len(ex))
    se_total = float(math.sqrt(cov_b[np.ix_(idx, idx)].sum()))
    pos = sum(v for v in coef.values() if v > 0)
    neg = sum(v for v in coef.values() if v < 0)
    weights = {e: (v / pos if v > 0 else v / neg) if v != 0 else 0.0 for e, v in coef.items()}
    return QgcompResult(pos, neg, pos + neg, se_total, coef, weights)
