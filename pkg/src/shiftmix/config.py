"""Analysis configuration shared by the engine and the command line."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from typing import Optional, Union

from .errors import ConfigurationError
from .superlearner import DENSITY_GRID, DISCOVERY_GRID, OUTCOME_GRID, LearnerGrid, LearnerSpec

GRID_KEYS = ("discovery_grid", "outcome_grid", "density_grid")


@dataclass(frozen=True)
class Config:
    data: Optional[str] = None
    outcome: Optional[str] = None
    exposures: tuple = ()
    covariates: tuple = ()
    delta: Union[float, dict] = 1.0
    folds: int = 10
    f_quantile: float = 0.0
    lam: float = 50.0
    reduce_frac: float = 0.1
    density_kind: str = "HOSE"
    seed: int = 0
    output: Optional[str] = None
    var_sets: Optional[tuple] = None  # bypasses discovery when given
    cv_folds: int = 5
    binary: Optional[bool] = None
    threads: int = 1
    discovery_grid: LearnerGrid = DISCOVERY_GRID
    outcome_grid: LearnerGrid = OUTCOME_GRID
    density_grid: LearnerGrid = DENSITY_GRID

    def __post_init__(self):
        object.__setattr__(self, "exposures", tuple(self.exposures))
        object.__setattr__(self, "covariates", tuple(self.covariates))
        if self.var_sets is not None:
            sets = tuple(tuple(sorted(s)) for s in self.var_sets)
            object.__setattr__(self, "var_sets", sets)
        for key in GRID_KEYS:
            g = getattr(self, key)
            if g.V != self.cv_folds:
                object.__setattr__(self, key, LearnerGrid(g.candidates, self.cv_folds))
        self.validate()

    def validate(self):
        names = [self.outcome] if self.outcome else []
        names += list(self.exposures) + list(self.covariates)
        if len(set(names)) != len(names):
            raise ConfigurationError("outcome, exposure and covariate names must be disjoint")
        if not 0.0 <= self.f_quantile <= 1.0:
            raise ConfigurationError("f_quantile must lie in [0, 1]")
        if not 0.0 < self.reduce_frac < 1.0:
            raise ConfigurationError("reduce_frac must lie in (0, 1)")
        if not self.lam > 0:
            raise ConfigurationError("lambda must be positive")
        if self.density_kind not in ("HOSE", "HESE"):
            raise ConfigurationError("density_kind must be HOSE or HESE")
        if self.folds < 2:
            raise ConfigurationError("need at least 2 folds")
        deltas = self.delta.values() if isinstance(self.delta, dict) else [self.delta]
        for d in deltas:
            if not math.isfinite(float(d)) or float(d) == 0:
                raise ConfigurationError(f"delta must be finite and nonzero, got {d}")
        if isinstance(self.delta, dict) and self.exposures:
            unknown = set(self.delta) - set(self.exposures)
            if unknown:
                raise ConfigurationError(f"delta given for non-exposures {sorted(unknown)}")
        if self.var_sets is not None:
            for s in self.var_sets:
                if not 1 <= len(s) <= 2 or len(set(s)) != len(s):
                    raise ConfigurationError(f"variable sets need one or two exposures: {s}")
                if self.exposures and not set(s) <= set(self.exposures):
                    raise ConfigurationError(f"variable set {s} names non-exposures")

    def delta_for(self, exposure) -> float:
        if isinstance(self.delta, dict):
            return float(self.delta.get(exposure, 1.0))
        return float(self.delta)

    def roles(self) -> dict:
        r = {self.outcome: "outcome"}
        r.update({e: "exposure" for e in self.exposures})
        r.update({c: "covariate" for c in self.covariates})
        return r

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, LearnerGrid):
                v = [c.to_dict() for c in v.candidates]
            elif isinstance(v, tuple):
                v = [list(x) if isinstance(x, tuple) else x for x in v]
            out[f.name] = v
        return out

    @classmethod
    def from_dict(cls, d) -> "Config":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known - {"lambda"}
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        V = int(d.get("cv_folds", 5))
        for key in GRID_KEYS:
            if key in d and not isinstance(d[key], LearnerGrid):
                d[key] = LearnerGrid(tuple(LearnerSpec.from_dict(c) for c in d[key]), V)
        if d.get("var_sets") is not None:
            d["var_sets"] = tuple(tuple(s) for s in d["var_sets"])
        for key in ("exposures", "covariates"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "Config":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc

    def updated(self, **changes) -> "Config":
        return replace(self, **changes)
