from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class Factor:
    var: str
    kind: str = "linear"  # "linear" | "hinge"
    knot: float = 0.0
    direction: int = 1  # +1: max(0, x - knot), -1: max(0, knot - x)

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "linear":
            return x
        if self.direction > 0:
            return np.maximum(0.0, x - self.knot)
        return np.maximum(0.0, self.knot - x)

    def label(self):
        if self.kind == "linear":
            return self.var
        if self.direction > 0:
            return f"h({self.var}-{self.knot:.6g})"
        return f"h({self.knot:.6g}-{self.var})"

    def to_dict(self):
        return {"var": self.var, "kind": self.kind, "knot": self.knot, "direction": self.direction}


@dataclass(frozen=True)
class BasisFunction:
    """Product of linear / hinge factors; the empty product is the intercept."""

    factors: tuple[Factor, ...] = ()

    @property
    def variable_set(self) -> frozenset:
        return frozenset(f.var for f in self.factors)

    @property
    def degree(self) -> int:
        return len(self.variable_set)

    @property
    def is_intercept(self) -> bool:
        return not self.factors

    def evaluate(self, X: Mapping[str, np.ndarray], n=None):
        if n is None:
            n = len(next(iter(X.values())))
        out = np.ones(n)
        for f in self.factors:
            if f.var not in X:
                raise ConfigurationError(f"design matrix lacks variable {f.var!r}")
            out = out * f.evaluate(X[f.var])
        return out

    def times(self, factor: Factor) -> "BasisFunction":
        return BasisFunction(self.factors + (factor,))

    def label(self):
        return "*".join(f.label() for f in self.factors) or "(Intercept)"

    def to_dict(self):
        return {"factors": [f.to_dict() for f in self.factors]}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(Factor(**f) for f in d["factors"]))


INTERCEPT = BasisFunction()


def design(bases, X: Mapping[str, np.ndarray]) -> np.ndarray:
    n = len(next(iter(X.values())))
    return np.column_stack([b.evaluate(X, n) for b in bases]) if bases else np.empty((n, 0))
