"""Observation container, fold assignment and outcome scaling."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .errors import ConfigurationError, DataError, DegenerateDataError

ROLES = ("covariate", "exposure", "outcome")


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Column-typed observations ``O = (W, A, Y)``.

    ``columns`` maps names to equal-length float vectors and ``roles`` maps
    every name to one of ``covariate``, ``exposure`` or ``outcome``.
    """

    columns: Mapping[str, np.ndarray]
    roles: Mapping[str, str]
    binary: bool = False

    def __post_init__(self):
        cols = {k: _frozen(v) for k, v in self.columns.items()}
        roles = dict(self.roles)
        if set(cols) != set(roles):
            raise ConfigurationError("every column needs exactly one role")
        bad = {r for r in roles.values() if r not in ROLES}
        if bad:
            raise ConfigurationError(f"unknown roles: {sorted(bad)}")
        outcomes = [k for k, r in roles.items() if r == "outcome"]
        if len(outcomes) != 1:
            raise ConfigurationError(f"expected exactly one outcome column, got {outcomes}")
        lengths = {len(v) for v in cols.values()}
        if len(lengths) != 1 or 0 in lengths:
            raise DataError("columns must share one nonzero length")
        for k, v in cols.items():
            if not np.all(np.isfinite(v)):
                raise DataError(f"column {k!r} has missing or non-finite values")
        object.__setattr__(self, "columns", MappingProxyType(cols))
        object.__setattr__(self, "roles", MappingProxyType(roles))

    @property
    def n(self) -> int:
        return len(next(iter(self.columns.values())))

    @property
    def outcome(self) -> str:
        return next(k for k, r in self.roles.items() if r == "outcome")

    @property
    def exposures(self) -> list[str]:
        # sorted so that column order never leaks into estimates
        return sorted(k for k, r in self.roles.items() if r == "exposure")

    @property
    def covariates(self) -> list[str]:
        return sorted(k for k, r in self.roles.items() if r == "covariate")

    @property
    def y(self) -> np.ndarray:
        return self.columns[self.outcome]

    def __getitem__(self, name):
        return self.columns[name]

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset({k: v[rows] for k, v in self.columns.items()}, self.roles, self.binary)

    def with_columns(self, **updates) -> "Dataset":
        cols = dict(self.columns)
        cols.update(updates)
        return Dataset(cols, self.roles, self.binary)

    def features(self) -> dict[str, np.ndarray]:
        """Exposures and covariates, i.e. everything the outcome regression sees."""
        return {k: self.columns[k] for k in self.exposures + self.covariates}


def is_binary(y) -> bool:
    y = np.asarray(y)
    return bool(np.all((y == 0) | (y == 1)))


def make_dataset(columns, roles, binary=None) -> Dataset:
    outcome = next((k for k, r in roles.items() if r == "outcome"), None)
    if binary is None:
        binary = outcome is not None and is_binary(columns[outcome])
    return Dataset(columns, roles, binary)


def load_csv(path, roles: Mapping[str, str], binary=None) -> Dataset:
    """Read a comma-separated file with a header row.

    Only role-named columns are kept; extra columns are ignored.
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot open data file {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        missing = [name for name in roles if name not in header]
        if missing:
            raise ConfigurationError(f"columns not found in {path}: {missing}")
        index = {name: header.index(name) for name in roles}
        values = {name: [] for name in roles}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            for name, j in index.items():
                cell = row[j].strip() if j < len(row) else ""
                try:
                    x = float(cell)
                except ValueError:
                    raise DataError(f"row {lineno}, column {name!r}: non-numeric or missing value {cell!r}") from None
                if not math.isfinite(x):
                    raise DataError(f"row {lineno}, column {name!r}: missing value {cell!r}")
                values[name].append(x)
    return make_dataset({k: np.array(v) for k, v in values.items()}, roles, binary)


def write_csv(dataset: Dataset, path):
    names = list(dataset.columns)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in zip(*(dataset.columns[k] for k in names)):
            w.writerow([repr(float(x)) for x in row])


@dataclass(frozen=True)
class FoldAssignment:
    K: int
    membership: np.ndarray  # labels 1..K

    def train(self, k) -> np.ndarray:
        return np.flatnonzero(self.membership != k)

    def valid(self, k) -> np.ndarray:
        return np.flatnonzero(self.membership == k)


def make_folds(n: int, K: int, seed: int) -> FoldAssignment:
    """Balanced random partition of ``range(n)`` into ``K`` labelled folds."""
    if K < 2:
        raise ConfigurationError(f"need at least 2 folds, got K={K}")
    if K > n:
        raise ConfigurationError(f"cannot split {n} observations into {K} folds")
    perm = np.random.default_rng(seed).permutation(n)
    labels = np.empty(n, dtype=int)
    labels[perm] = np.arange(n) % K + 1
    labels.setflags(write=False)
    return FoldAssignment(K, labels)


@dataclass(frozen=True)
class ScalingRecord:
    y_min: float = 0.0
    y_max: float = 1.0

    @property
    def span(self) -> float:
        return self.y_max - self.y_min

    def scale(self, y):
        return (np.asarray(y, dtype=float) - self.y_min) / self.span

    def unscale(self, s):
        return np.asarray(s, dtype=float) * self.span + self.y_min

    def covering(self, *arrays) -> "ScalingRecord":
        """Widen the bounds so every value in ``arrays`` maps into [0, 1].

        Counterfactual predictions routinely leave the observed outcome range;
        clipping them at the boundary would bias the plug-in.
        """
        lo, hi = self.y_min, self.y_max
        for a in arrays:
            a = np.asarray(a)
            if a.size:
                lo = min(lo, float(a.min()))
                hi = max(hi, float(a.max()))
        return ScalingRecord(lo, hi)


def scale_outcome(d: Dataset) -> tuple[Dataset, ScalingRecord]:
    if d.binary:
        return d, ScalingRecord(0.0, 1.0)
    y = d.y
    lo, hi = float(y.min()), float(y.max())
    if not hi > lo:
        raise DegenerateDataError(f"outcome {d.outcome!r} is constant")
    rec = ScalingRecord(lo, hi)
    return d.with_columns(**{d.outcome: rec.scale(y)}), rec


def derive_seed(*keys) -> int:
    """Deterministic child seed from an integer key path."""
    ss = np.random.SeedSequence([int(k) & 0xFFFFFFFF for k in keys])
    return int(ss.generate_state(1)[0])


@dataclass(frozen=True)
class ShiftSpec:
    """Additive shift: every target exposure ``a`` becomes ``a + delta[a]``."""

    targets: tuple
    delta: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        targets = tuple(self.targets)
        if not 1 <= len(targets) <= 2 or len(set(targets)) != len(targets):
            raise ConfigurationError(f"shift needs one or two distinct targets, got {targets}")
        delta = {t: float(self.delta[t]) for t in targets if t in self.delta}
        if set(delta) != set(targets):
            raise ConfigurationError(f"missing delta for {sorted(set(targets) - set(delta))}")
        if not all(math.isfinite(v) for v in delta.values()):
            raise ConfigurationError("shift amounts must be finite")
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "delta", MappingProxyType(delta))

    def check(self, dataset: Dataset, allow_zero=False):
        for t in self.targets:
            if dataset.roles.get(t) != "exposure":
                raise ConfigurationError(f"{t!r} is not an exposure column")
            if not allow_zero and self.delta[t] == 0:
                raise ConfigurationError(f"shift for {t!r} must be nonzero")

    def apply(self, cols, sign=1.0) -> dict:
        out = dict(cols)
        for t in self.targets:
            out[t] = np.asarray(cols[t]) + sign * self.delta[t]
        return out
