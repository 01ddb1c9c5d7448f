"""Domain types and single-scenario empirical risk measures.

Every sample is an equally weighted empirical loss distribution. The
Expected Shortfall used throughout is the Rockafellar-Uryasev value

    ES_a(X) = min_c { c + E[(X - c)_+] / (1 - a) }

evaluated over the distinct sample values, which is exactly what the
portfolio linear programs in :mod:`riskquad.lp` optimise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels

SIMPLEX_TOL = 1e-12


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class Scenario:
    id: str
    label: str = ""
    sample_count: int = 1

    def __post_init__(self):
        if self.sample_count < 1:
            raise ValueError(f"scenario {self.id!r}: sample_count must be >= 1")


@dataclass(frozen=True)
class ScenarioSet:
    scenarios: tuple[Scenario, ...]

    def __post_init__(self):
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        if not self.scenarios:
            raise ValueError("a scenario set needs at least one scenario")
        ids = [s.id for s in self.scenarios]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate scenario ids in {ids}")

    def __len__(self):
        return len(self.scenarios)

    @property
    def ids(self) -> list[str]:
        return [s.id for s in self.scenarios]


@dataclass(frozen=True)
class WeightVector:
    """Probability weights over the scenarios of a :class:`ScenarioSet`."""

    weights: np.ndarray
    monotone: bool = False

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64).ravel()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        check_simplex(w, tol=SIMPLEX_TOL)
        if self.monotone and np.any(np.diff(w) < 0):
            raise ValueError(f"weights {w} are not non-decreasing")

    def __len__(self):
        return self.weights.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.weights if dtype is None else self.weights.astype(dtype)

    @classmethod
    def uniform(cls, n: int) -> "WeightVector":
        return cls(np.full(n, 1.0 / n))


@dataclass(frozen=True)
class RiskVector:
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).ravel()
        if v.shape[0] == 0 or not np.all(np.isfinite(v)):
            raise ValueError("risk vector must be nonempty and finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass(frozen=True)
class LossSample:
    losses: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "losses", as_sample(self.losses))

    def __len__(self):
        return self.losses.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.losses if dtype is None else self.losses.astype(dtype)


@dataclass(frozen=True)
class Level:
    alpha: float

    def __post_init__(self):
        check_level(self.alpha)

    def __float__(self):
        return float(self.alpha)


class Quartet(NamedTuple):
    risk: float
    deviation: float
    regret: float
    error: float
    statistic: float


# ---------------------------------------------------------------------------
# validation helpers


def check_simplex(w, tol: float = SIMPLEX_TOL) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1 or w.shape[0] == 0:
        raise ValueError("weights must be a nonempty vector")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError(f"weights must be finite and nonnegative, got {w}")
    if abs(math.fsum(w) - 1.0) > tol:
        raise ValueError(f"weights must sum to 1 (sum={math.fsum(w)!r})")
    return w


def check_level(alpha) -> float:
    a = float(alpha)
    if not 0.0 < a < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {a}")
    return a


def as_sample(s) -> np.ndarray:
    """Coerce a loss sample to a read-only 1-D float array, validating it."""
    if isinstance(s, LossSample):
        return s.losses
    a = np.array(s, dtype=np.float64).ravel()
    if a.shape[0] == 0:
        raise ValueError("loss sample is empty")
    if not np.all(np.isfinite(a)):
        raise ValueError("loss sample contains non-finite values")
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# operations


def sort_ascending(v) -> np.ndarray:
    """Order statistics of a risk vector (stable, ties keep input order)."""
    return np.sort(np.asarray(v, dtype=np.float64), kind="stable")


def expectation(s) -> float:
    a = as_sample(s)
    return float(a.sum() / a.shape[0])


def var_alpha(s, alpha) -> float:
    """Left-continuous empirical quantile: smallest x with F(x) >= alpha."""
    return kernels.sorted_var(np.sort(as_sample(s)), check_level(alpha))


def _integer_tail(n: int, alpha: float) -> int | None:
    """Number of tail points when alpha*n is an integer, else None."""
    k = round(alpha * n)
    if abs(alpha * n - k) <= 1e-9 * max(1.0, n):
        return n - k
    return None


def es_alpha(s, alpha) -> float:
    """Expected Shortfall of a loss sample at level ``alpha``.

    When ``alpha * T`` is an integer this is the exactly rounded mean of the
    ``(1 - alpha) T`` largest losses; otherwise the minimum of the
    Rockafellar-Uryasev objective over the distinct sample values.
    """
    a = check_level(alpha)
    srt = np.sort(as_sample(s))
    tail = _integer_tail(srt.shape[0], a)
    if tail:
        return math.fsum(srt[srt.shape[0] - tail:]) / tail
    return kernels.sorted_es(srt, a)


def ru_objective(s, alpha, c: float) -> float:
    """c + mean((s - c)_+) / (1 - alpha)."""
    a = check_level(alpha)
    return c + kernels.mean_pos_part(as_sample(s), c) / (1.0 - a)


def regret_es(s, alpha) -> float:
    a = check_level(alpha)
    return kernels.mean_pos_part(as_sample(s), 0.0) / (1.0 - a)


def error_kb(s, alpha) -> float:
    """Rescaled Koenker-Bassett error E[a/(1-a) X_+ + X_-]."""
    a = check_level(alpha)
    x = as_sample(s)
    pos = np.maximum(x, 0.0)
    neg = np.maximum(-x, 0.0)
    return float((a / (1.0 - a) * pos + neg).sum() / x.shape[0])


def deviation_es(s, alpha) -> float:
    x = as_sample(s)
    return es_alpha(x - expectation(x), alpha)


def es_quartet(s, alpha) -> Quartet:
    x = as_sample(s)
    return Quartet(
        risk=es_alpha(x, alpha),
        deviation=deviation_es(x, alpha),
        regret=regret_es(x, alpha),
        error=error_kb(x, alpha),
        statistic=var_alpha(x, alpha),
    )


__all__ = [
    "Scenario",
    "ScenarioSet",
    "WeightVector",
    "RiskVector",
    "LossSample",
    "Level",
    "Quartet",
    "check_simplex",
    "check_level",
    "as_sample",
    "sort_ascending",
    "expectation",
    "var_alpha",
    "es_alpha",
    "ru_objective",
    "regret_es",
    "error_kb",
    "deviation_es",
    "es_quartet",
]
