"""Multi-scenario Expected Shortfall quadrangle.

Per-scenario statistic, risk and deviation are mixed linearly with the
scenario weights. Regret and error are mixed with per-scenario offsets
``b`` constrained to weighted mean zero and chosen to minimise the mixed
regret. Optimal offsets are per-scenario quantiles at one common level,
found exactly by :class:`OffsetSolver`. For the shifted loss X - S_Q the
common level is alpha itself and the optimum reduces to the centred
statistics ``b_i = S_i - sum_j mu_j S_j`` (:func:`offsets_b`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import core
from .core import as_sample, check_level
from .wgrm import _weights

GOLDEN_ITERATIONS = 200


@dataclass(frozen=True)
class WeightedQuartet:
    risk: float
    deviation: float
    regret: float
    error: float
    statistic: float
    offsets: np.ndarray
    weighted_expectation: float


def _prepare(samples, mu):
    xs = [as_sample(s) for s in samples]
    w = _weights(mu)
    if len(xs) != w.shape[0]:
        raise ValueError(f"length mismatch: {len(xs)} samples, {w.shape[0]} weights")
    return xs, w


def weighted_expectation(samples, mu) -> float:
    xs, w = _prepare(samples, mu)
    return float(sum(core.expectation(x) * wi for x, wi in zip(xs, w)))


def offsets_b(statistics, mu) -> np.ndarray:
    s = np.asarray(statistics, dtype=np.float64).ravel()
    w = _weights(mu)
    if s.shape[0] != w.shape[0]:
        raise ValueError("length mismatch between statistics and weights")
    return s - float(s @ w)


class OffsetSolver:
    """Exact minimiser of sum_i mu_i V_i(X - c - b_i) subject to sum mu b = 0.

    Each V_i is the ES regret of an empirical sample, so the optimality
    condition puts every ``c + b_i`` at a quantile of sample ``i`` for one
    shared level. The weighted quantile sum is a non-decreasing step
    function of that level; the solver locates where it crosses ``c`` and
    interpolates inside the crossing step, which keeps every ``c + b_i``
    inside its scenario's optimal interval.
    """

    def __init__(self, xs, w):
        self.xs = [np.sort(x) for x in xs]
        self.w = np.asarray(w, dtype=np.float64)
        sizes = [x.shape[0] for x in self.xs]
        grid = np.unique(np.concatenate([np.arange(T + 1) / T for T in sizes]))
        mids = (grid[:-1] + grid[1:]) / 2.0
        # Q[i, k]: quantile of scenario i on the k-th open level interval
        self.Q = np.vstack([x[np.ceil(mids * x.shape[0]).astype(np.int64) - 1] for x in self.xs])
        self.H = self.w @ self.Q
        positive = np.flatnonzero(self.w > 0)
        self.sole = int(positive[0]) if positive.shape[0] == 1 else None

    def locations(self, c: float = 0.0) -> np.ndarray:
        """Optimal ``c + b_i`` for the loss X - c; weighted mean equals ``c``."""
        if self.sole is not None:
            z = self.Q[:, 0].copy()
            z[self.sole] = c
            return z
        H, Q = self.H, self.Q
        k = int(np.searchsorted(H, c, side="left"))
        if k < H.shape[0] and H[k] == c:
            return Q[:, k].copy()
        if k == 0:
            return Q[:, 0] + (c - H[0])
        if k == H.shape[0]:
            return Q[:, -1] + (c - H[-1])
        theta = (c - H[k - 1]) / (H[k] - H[k - 1])
        return Q[:, k - 1] + theta * (Q[:, k] - Q[:, k - 1])

    def offsets(self, c: float = 0.0) -> np.ndarray:
        return self.locations(c) - c

    def regret(self, alpha: float, c: float = 0.0) -> float:
        """Weighted regret of X - c at the optimal offsets."""
        z = self.locations(c)
        return float(np.array([core.regret_es(x - zi, alpha) for x, zi in zip(self.xs, z)]) @ self.w)

    def error(self, alpha: float, c: float = 0.0) -> float:
        z = self.locations(c)
        return float(np.array([core.error_kb(x - zi, alpha) for x, zi in zip(self.xs, z)]) @ self.w)


def optimal_offsets(samples, mu) -> np.ndarray:
    """Offsets b minimising the mixed ES regret of X (any level)."""
    xs, w = _prepare(samples, mu)
    return OffsetSolver(xs, w).offsets(0.0)


def mix_quartet(samples, alpha, mu) -> WeightedQuartet:
    xs, w = _prepare(samples, mu)
    a = check_level(alpha)
    stats = np.array([core.var_alpha(x, a) for x in xs])
    b = OffsetSolver(xs, w).offsets(0.0)
    shifted = [x - bi if bi != 0.0 else x for x, bi in zip(xs, b)]
    return WeightedQuartet(
        risk=float(np.array([core.es_alpha(x, a) for x in xs]) @ w),
        deviation=float(np.array([core.deviation_es(x, a) for x in xs]) @ w),
        regret=float(np.array([core.regret_es(x, a) for x in shifted]) @ w),
        error=float(np.array([core.error_kb(x, a) for x in shifted]) @ w),
        statistic=float(stats @ w),
        offsets=b,
        weighted_expectation=weighted_expectation(xs, w),
    )


def golden_section(fn, lo: float, hi: float, iterations: int = GOLDEN_ITERATIONS) -> tuple[float, float]:
    """Minimise a convex scalar function on [lo, hi]; returns (argmin, min)."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iterations):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = fn(d)
        if b - a <= 1e-15 * max(1.0, abs(a), abs(b)):
            break
    x = (a + b) / 2.0
    best = min((fn(x), x), (fc, c), (fd, d))
    return best[1], best[0]


@dataclass
class IdentityReport:
    ok: bool
    tol: float
    residuals: dict = field(default_factory=dict)
    quartet: WeightedQuartet | None = None


def verify_identities(samples, alpha, mu, tol: float = 1e-6) -> IdentityReport:
    """Check the four quadrangle relations for the weighted ES quartet.

    Exact relations (risk/deviation and regret/error through the weighted
    expectation) are checked at 1e-10. The two minimisation relations are
    solved by golden-section search over ``c`` and checked at ``tol``,
    together with membership of the statistic in the argmin set.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    xs, w = _prepare(samples, mu)
    a = check_level(alpha)
    q = mix_quartet(xs, a, w)
    ex = q.weighted_expectation
    lo = min(float(x.min()) for x in xs) - 1.0
    hi = max(float(x.max()) for x in xs) + 1.0

    solver = OffsetSolver(xs, w)
    risk_obj = lambda c: c + solver.regret(a, c)
    dev_obj = lambda c: solver.error(a, c)
    _, risk_min = golden_section(risk_obj, lo, hi)
    _, dev_min = golden_section(dev_obj, lo, hi)

    res = {
        "risk_minus_expectation_plus_deviation": abs(q.risk - (ex + q.deviation)),
        "regret_minus_expectation_plus_error": abs(q.regret - (ex + q.error)),
        "offsets_weighted_sum": abs(float(q.offsets @ w)),
        "risk_vs_min_regret": abs(risk_min - q.risk),
        "deviation_vs_min_error": abs(dev_min - q.deviation),
        "statistic_risk_argmin_gap": max(0.0, risk_obj(q.statistic) - risk_min),
        "statistic_error_argmin_gap": max(0.0, dev_obj(q.statistic) - dev_min),
    }
    limits = {
        "risk_minus_expectation_plus_deviation": 1e-10,
        "regret_minus_expectation_plus_error": 1e-10,
        "offsets_weighted_sum": 1e-10,
    }
    ok = all(v <= limits.get(k, tol) for k, v in res.items())
    return IdentityReport(ok=ok, tol=tol, residuals=res, quartet=q)


__all__ = [
    "WeightedQuartet",
    "IdentityReport",
    "weighted_expectation",
    "offsets_b",
    "mix_quartet",
    "verify_identities",
    "golden_section",
    "OffsetSolver",
    "optimal_offsets",
]
