"""Weighted aggregation of per-scenario risk evaluations.

Discrete aggregation is an inner product of scenario weights with the
vector of per-scenario risks. The sup-form aggregators evaluate the
largest inner product of a finite list of weight vectors with the sorted
risk vector; since the objective is linear, a polytope of weights is
represented exactly by its vertex list.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import SIMPLEX_TOL, WeightVector, check_simplex, sort_ascending

AXIOM_TOL = 1e-8
AXIOMS = ("B1", "B2", "B3", "B3'", "B4", "B6", "B6'")


class AxiomsViolated(ValueError):
    """A black-box functional does not behave like a weighted aggregator."""


def _vec(v) -> np.ndarray:
    a = np.asarray(v, dtype=np.float64).ravel()
    if a.shape[0] == 0 or not np.all(np.isfinite(a)):
        raise ValueError("risk vector must be nonempty and finite")
    return a


def _weights(mu) -> np.ndarray:
    if isinstance(mu, WeightVector):
        return mu.weights
    return check_simplex(np.asarray(mu, dtype=np.float64).ravel())


@dataclass(frozen=True)
class WeightSet:
    """Finite list of simplex weight vectors (vertices of the candidate set)."""

    members: tuple
    monotone_required: bool = False

    def __post_init__(self):
        rows = tuple(_weights(m) for m in self.members)
        if not rows:
            raise ValueError("weight set is empty")
        n = rows[0].shape[0]
        if any(r.shape[0] != n for r in rows):
            raise ValueError("weight set members differ in length")
        if self.monotone_required:
            for r in rows:
                if np.any(np.diff(r) < 0):
                    raise ValueError(f"member {r} is not non-decreasing")
        object.__setattr__(self, "members", rows)

    @property
    def n(self) -> int:
        return self.members[0].shape[0]

    def as_matrix(self) -> np.ndarray:
        return np.vstack(self.members)


def aggregate(v, mu) -> float:
    """Weighted risk sum(Psi(X|P_i) * mu_i)."""
    phi, w = _vec(v), _weights(mu)
    if phi.shape[0] != w.shape[0]:
        raise ValueError(f"length mismatch: {phi.shape[0]} risks, {w.shape[0]} weights")
    return float(phi @ w)


def aggregate_sup(v, W: WeightSet) -> float:
    """Largest weighted sum of the sorted risks over the members of ``W``."""
    if not isinstance(W, WeightSet):
        W = WeightSet(tuple(W))
    phi = _vec(v)
    if phi.shape[0] != W.n:
        raise ValueError(f"length mismatch: {phi.shape[0]} risks, weight set of size {W.n}")
    return float(np.max(W.as_matrix() @ sort_ascending(phi)))


def recover_weights(f: Callable[[np.ndarray], float], n: int, tol: float = 1e-8) -> np.ndarray:
    """Recover the unique weights of a comonotonically additive aggregator.

    Evaluates ``f`` on the indicator vectors u_k = (0,..,0,1,..,1) with k
    trailing ones; successive differences give the weights from the top
    down. Raises :class:`AxiomsViolated` when the result is not a
    probability vector to within ``tol``.
    """
    if n < 1:
        raise ValueError("n must be positive")
    mu = np.empty(n)
    prev = 0.0
    for k in range(1, n + 1):
        u = np.zeros(n)
        u[n - k:] = 1.0
        fk = float(f(u))
        mu[n - k] = fk - prev
        prev = fk
    if np.any(mu < -tol) or abs(math.fsum(mu) - 1.0) > tol:
        raise AxiomsViolated(f"recovered weights {mu} are not a probability vector")
    return mu


def a3_check(risk_Q, mu_Q, risk_R, mu_R) -> bool:
    """True iff aggregating over the smaller set gives no more risk."""
    return aggregate(risk_Q, mu_Q) <= aggregate(risk_R, mu_R)


# ---------------------------------------------------------------------------
# continuous (density-weighted) aggregation


@dataclass(frozen=True)
class DensityWeighting:
    """Piecewise-constant density on [0, 1]."""

    breakpoints: np.ndarray
    values: np.ndarray
    monotone: bool = False

    def __post_init__(self):
        t = np.asarray(self.breakpoints, dtype=np.float64).ravel()
        v = np.asarray(self.values, dtype=np.float64).ravel()
        if t.shape[0] != v.shape[0] + 1 or v.shape[0] == 0:
            raise ValueError("need len(breakpoints) == len(values) + 1 >= 2")
        if t[0] != 0.0 or t[-1] != 1.0 or np.any(np.diff(t) <= 0):
            raise ValueError("breakpoints must increase strictly from 0 to 1")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("density values must be finite and nonnegative")
        mass = math.fsum(v * np.diff(t))
        if abs(mass - 1.0) > 1e-10:
            raise ValueError(f"density integrates to {mass!r}, not 1")
        if self.monotone and np.any(np.diff(v) < 0):
            raise ValueError("density is flagged non-decreasing but is not")
        object.__setattr__(self, "breakpoints", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def uniform(cls) -> "DensityWeighting":
        return cls([0.0, 1.0], [1.0])

    @classmethod
    def staircase(cls, fn: Callable[[np.ndarray], np.ndarray], pieces: int) -> "DensityWeighting":
        """Equal-width staircase of ``fn`` sampled at piece midpoints, renormalised."""
        t = np.linspace(0.0, 1.0, pieces + 1)
        v = np.asarray(fn((t[:-1] + t[1:]) / 2.0), dtype=np.float64)
        v = v / math.fsum(v * np.diff(t))
        return cls(t, v, monotone=bool(np.all(np.diff(v) >= 0)))


def _cell_density(m: int, nu: DensityWeighting) -> np.ndarray:
    """Average density over each uniform cell [k/m, (k+1)/m).

    Work in cell units (breakpoints scaled by m) so that a breakpoint at
    0 or 1 lands on an integer exactly.
    """
    s = nu.breakpoints * m
    out = np.zeros(m)
    p = 0
    for k in range(m):
        lo, hi = float(k), float(k + 1)
        acc = 0.0
        while p < nu.values.shape[0] and s[p + 1] <= lo:
            p += 1
        q = p
        while q < nu.values.shape[0] and s[q] < hi:
            acc += nu.values[q] * (min(hi, s[q + 1]) - max(lo, s[q]))
            q += 1
        out[k] = acc
    return out


def aggregate_density(grid_values, nu: DensityWeighting) -> float:
    """Integral of the sorted scenario risks against a density on [0, 1].

    ``grid_values`` are risk evaluations on m equal-mass cells of the
    scenario continuum. Both the sorted risk profile and the density are
    piecewise constant, so integrating over the common refinement is
    exact; sums are exactly rounded so the result does not depend on the
    order of ``grid_values``.
    """
    if not isinstance(nu, DensityWeighting):
        raise ValueError("nu must be a DensityWeighting")
    phi = sort_ascending(_vec(grid_values))
    m = phi.shape[0]
    return math.fsum(phi * _cell_density(m, nu)) / m


# ---------------------------------------------------------------------------
# axiom checks


@dataclass
class AxiomOutcome:
    passed: bool
    trials: int
    counterexample: dict | None = None


@dataclass
class AxiomReport:
    n: int
    trials: int
    seed: int
    outcomes: dict = field(default_factory=dict)

    def passed(self, axiom: str) -> bool:
        return self.outcomes[axiom].passed

    def matrix(self) -> dict:
        return {k: v.passed for k, v in self.outcomes.items()}


def _monotone_map(rng: np.random.Generator, lo: float, hi: float):
    """Random non-decreasing piecewise-linear map on [lo, hi]."""
    knots = np.sort(rng.uniform(lo, hi, size=4))
    xs = np.concatenate(([lo - 1.0], knots, [hi + 1.0]))
    ys = np.cumsum(rng.exponential(1.0, size=xs.shape[0]) * (rng.random(xs.shape[0]) < 0.8))
    ys = ys * rng.uniform(0.1, 5.0) + rng.normal()
    return lambda z: np.interp(z, xs, ys)


def comonotone_pair(rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
    z = rng.normal(size=n)
    f, g = _monotone_map(rng, -3.0, 3.0), _monotone_map(rng, -3.0, 3.0)
    return f(z), g(z)


def _sym(rng, n):
    return rng.normal(scale=rng.choice([0.5, 1.0, 10.0]), size=n)


def check_axioms(
    f: Callable[[np.ndarray], float],
    n: int,
    trials: int = 1000,
    seed: int = 0,
    tol: float = AXIOM_TOL,
) -> AxiomReport:
    """Randomised check of the aggregation axioms B1-B4, B3', B6, B6'.

    Each axiom gets its own generator derived from ``seed`` so that every
    recorded counterexample can be replayed independently.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    report = AxiomReport(n=n, trials=trials, seed=seed)
    children = np.random.SeedSequence(seed).spawn(len(AXIOMS))

    def run(axiom, rng, probe):
        for i in range(trials):
            bad = probe(rng)
            if bad is not None:
                bad["trial"] = i
                report.outcomes[axiom] = AxiomOutcome(False, i + 1, bad)
                return
        report.outcomes[axiom] = AxiomOutcome(True, trials)

    def b1(rng):
        x, a, b = _sym(rng, n), float(rng.exponential(2.0)), float(rng.normal(scale=5.0))
        if rng.random() < 0.05:
            a = 0.0
        lhs, rhs = f(a * x + b), a * f(x) + b
        if abs(lhs - rhs) > tol * max(1.0, abs(rhs)):
            return {"x": x.tolist(), "a": a, "b": b, "lhs": lhs, "rhs": rhs}

    def b2(rng):
        x = _sym(rng, n)
        y = x + rng.exponential(1.0, size=n) * (rng.random(n) < 0.7)
        if f(x) > f(y) + tol:
            return {"x": x.tolist(), "y": y.tolist(), "fx": f(x), "fy": f(y)}

    def subadd(pair):
        def probe(rng):
            x, y = pair(rng)
            lhs, rhs = f(x + y), f(x) + f(y)
            if lhs > rhs + tol * max(1.0, abs(rhs)):
                return {"x": x.tolist(), "y": y.tolist(), "lhs": lhs, "rhs": rhs}
        return probe

    def additive(pair):
        def probe(rng):
            x, y = pair(rng)
            lhs, rhs = f(x + y), f(x) + f(y)
            if abs(lhs - rhs) > tol * max(1.0, abs(rhs)):
                return {"x": x.tolist(), "y": y.tolist(), "lhs": lhs, "rhs": rhs}
        return probe

    def b4(rng):
        x = _sym(rng, n)
        perm = rng.permutation(n)
        if abs(f(x) - f(x[perm])) > tol * max(1.0, abs(f(x))):
            return {"x": x.tolist(), "perm": perm.tolist(), "fx": f(x), "fpx": f(x[perm])}

    como = lambda rng: comonotone_pair(rng, n)
    free = lambda rng: (_sym(rng, n), _sym(rng, n))
    probes = {
        "B1": b1,
        "B2": b2,
        "B3": subadd(como),
        "B3'": subadd(free),
        "B4": b4,
        "B6": additive(como),
        "B6'": additive(free),
    }
    for axiom, child in zip(AXIOMS, children):
        run(axiom, np.random.default_rng(child), probes[axiom])
    return report


# ---------------------------------------------------------------------------
# reference functionals


def linear_functional(mu) -> Callable[[np.ndarray], float]:
    w = _weights(mu)
    return lambda v: float(np.asarray(v, dtype=np.float64) @ w)


def sorted_linear_functional(mu) -> Callable[[np.ndarray], float]:
    w = _weights(mu)
    return lambda v: float(sort_ascending(v) @ w)


def max_functional(v) -> float:
    return float(np.max(v))


def first_coordinate(v) -> float:
    return float(np.asarray(v)[0])


def sup_functional(W: WeightSet) -> Callable[[np.ndarray], float]:
    return lambda v: aggregate_sup(v, W)


__all__ = [
    "AXIOMS",
    "AXIOM_TOL",
    "AxiomsViolated",
    "WeightSet",
    "DensityWeighting",
    "AxiomOutcome",
    "AxiomReport",
    "aggregate",
    "aggregate_sup",
    "aggregate_density",
    "recover_weights",
    "a3_check",
    "check_axioms",
    "comonotone_pair",
    "linear_functional",
    "sorted_linear_functional",
    "max_functional",
    "first_coordinate",
    "sup_functional",
    "SIMPLEX_TOL",
]
