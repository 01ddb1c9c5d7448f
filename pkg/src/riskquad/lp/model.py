"""Linear-program data model and the portfolio program builders.

Variable order is fixed: asset weights ``x1..xm``, the shift ``c``, the
scenario offsets ``b1..bn`` and then the epigraph variables grouped by
scenario and, inside a scenario, by day. Rows follow the same grouping,
then the offset balance row, the target-return row and the budget row.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .. import core
from ..core import check_level, check_simplex

SENSES = ("L", "G", "E")  # <=, >=, =
INF = math.inf
CORNER_TOL = 1e-9


@dataclass(frozen=True)
class LpRow:
    name: str
    index: tuple  # column positions, strictly increasing
    value: tuple
    sense: str
    rhs: float


@dataclass(frozen=True)
class LpModel:
    """Minimisation LP with sparse rows and per-variable bounds."""

    name: str
    variables: tuple
    objective: tuple
    rows: tuple
    lower: tuple
    upper: tuple
    objective_offset: float = 0.0

    def __post_init__(self):
        n = len(self.variables)
        if len(set(self.variables)) != n:
            raise ValueError("duplicate variable names")
        if not (len(self.objective) == len(self.lower) == len(self.upper) == n):
            raise ValueError("objective and bounds must match the variable count")
        if not all(math.isfinite(v) for v in self.objective) or not math.isfinite(self.objective_offset):
            raise ValueError("objective coefficients must be finite")
        for lo, hi in zip(self.lower, self.upper):
            if math.isnan(lo) or math.isnan(hi) or lo > hi or lo == INF or hi == -INF:
                raise ValueError(f"bad bounds [{lo}, {hi}]")
        names = set()
        for row in self.rows:
            if row.sense not in SENSES:
                raise ValueError(f"bad sense {row.sense!r} in row {row.name}")
            if row.name in names or row.name in self.variables:
                raise ValueError(f"duplicate name {row.name}")
            names.add(row.name)
            if not math.isfinite(row.rhs) or not all(math.isfinite(v) for v in row.value):
                raise ValueError(f"non-finite data in row {row.name}")
            if len(row.index) != len(row.value) or list(row.index) != sorted(set(row.index)):
                raise ValueError(f"row {row.name}: indices must be unique and increasing")
            if row.index and (row.index[0] < 0 or row.index[-1] >= n):
                raise ValueError(f"row {row.name}: column index out of range")

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), len(self.variables)

    def matrix(self) -> np.ndarray:
        A = np.zeros(self.shape)
        for i, row in enumerate(self.rows):
            A[i, list(row.index)] = row.value
        return A

    def column(self, name: str) -> int:
        return self.variables.index(name)

    def evaluate(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        return math.fsum(list(np.asarray(self.objective) * x) + [self.objective_offset])


class _Builder:
    def __init__(self, name):
        self.name = name
        self.vars, self.obj, self.lo, self.hi = [], [], [], []
        self.rows = []
        self.pos = {}

    def var(self, name, obj=0.0, lo=0.0, hi=INF):
        self.pos[name] = len(self.vars)
        self.vars.append(name)
        self.obj.append(float(obj))
        self.lo.append(float(lo))
        self.hi.append(float(hi))

    def row(self, name, coefs: dict, sense, rhs):
        # merge repeated columns, drop exact zeros, keep column order
        acc = {}
        for k, v in coefs.items():
            acc[self.pos[k]] = acc.get(self.pos[k], 0.0) + float(v)
        idx = sorted(j for j, v in acc.items() if v != 0.0)
        self.rows.append(LpRow(name, tuple(idx), tuple(acc[j] for j in idx), sense, float(rhs)))

    def build(self) -> LpModel:
        return LpModel(
            self.name,
            tuple(self.vars),
            tuple(self.obj),
            tuple(self.rows),
            tuple(self.lo),
            tuple(self.hi),
        )


@dataclass
class PortfolioProblem:
    """Inputs of the scenario-weighted ES portfolio program.

    ``returns[i]`` is a (T_i, m) array: one row per day of scenario ``i``,
    one column per asset. ``theta[i]`` holds the expected asset returns
    under scenario ``i``.
    """

    returns: list
    theta: list
    theta0: float
    alpha: float
    mu: np.ndarray
    constraint_mode: str = "equality"
    assets: tuple = field(default=())

    def __post_init__(self):
        self.returns = [np.atleast_2d(np.asarray(r, dtype=np.float64)) for r in self.returns]
        if not self.returns:
            raise ValueError("at least one scenario is required")
        m = self.returns[0].shape[1]
        if m < 1:
            raise ValueError("at least one asset is required")
        for r in self.returns:
            if r.ndim != 2 or r.shape[1] != m or r.shape[0] < 1:
                raise ValueError("every scenario needs a (T_i >= 1, m) return matrix")
            if not np.all(np.isfinite(r)):
                raise ValueError("returns must be finite")
        self.theta = [np.asarray(t, dtype=np.float64).ravel() for t in self.theta]
        if len(self.theta) != len(self.returns) or any(t.shape[0] != m for t in self.theta):
            raise ValueError("theta needs one length-m vector per scenario")
        if not all(np.all(np.isfinite(t)) for t in self.theta) or not math.isfinite(self.theta0):
            raise ValueError("theta values must be finite")
        self.alpha = check_level(self.alpha)
        self.mu = check_simplex(self.mu)
        if self.mu.shape[0] != len(self.returns):
            raise ValueError("one weight per scenario is required")
        if self.constraint_mode not in ("equality", "at_least"):
            raise ValueError(f"unknown constraint_mode {self.constraint_mode!r}")
        if self.assets and len(self.assets) != m:
            raise ValueError("asset labels must match the return columns")

    @property
    def m(self) -> int:
        return self.returns[0].shape[1]

    @property
    def n(self) -> int:
        return len(self.returns)

    def theta_manager(self) -> np.ndarray:
        """mu-weighted mean of the scenario expected returns."""
        return np.array([math.fsum(self.mu[i] * self.theta[i][j] for i in range(self.n)) for j in range(self.m)])


def _weights_block(b: _Builder, m: int):
    for j in range(m):
        b.var(f"x{j + 1}", 0.0, 0.0, 1.0)


def _loss_terms(r_day: np.ndarray, scale: float = 1.0) -> dict:
    # loss of the portfolio on one day is -sum_j r_j x_j
    return {f"x{j + 1}": -scale * float(v) for j, v in enumerate(r_day)}


def _portfolio_rows(b: _Builder, theta: np.ndarray, theta0: float, sense: str):
    b.row("target", {f"x{j + 1}": float(v) for j, v in enumerate(theta)}, sense, theta0)
    b.row("budget", {f"x{j + 1}": 1.0 for j in range(theta.shape[0])}, "E", 1.0)


def build_manager_lp(p: PortfolioProblem) -> LpModel:
    """Weighted-ES program of the portfolio manager."""
    b = _Builder("MANAGER")
    _weights_block(b, p.m)
    b.var("c", 1.0, -INF, INF)
    for i in range(p.n):
        b.var(f"b{i + 1}", 0.0, -INF, INF)
    for i, r in enumerate(p.returns):
        coef = float(p.mu[i]) / ((1.0 - p.alpha) * r.shape[0])
        for k in range(r.shape[0]):
            b.var(f"t{i + 1}_{k + 1}", coef, 0.0, INF)
    for i, r in enumerate(p.returns):
        for k in range(r.shape[0]):
            terms = _loss_terms(r[k])
            terms.update({"c": -1.0, f"b{i + 1}": -1.0, f"t{i + 1}_{k + 1}": -1.0})
            b.row(f"r{i + 1}_{k + 1}", terms, "L", 0.0)
    b.row("bsum", {f"b{i + 1}": float(p.mu[i]) for i in range(p.n)}, "E", 0.0)
    _portfolio_rows(b, p.theta_manager(), p.theta0, "E" if p.constraint_mode == "equality" else "G")
    return b.build()


def build_analyst_lp(p: PortfolioProblem, i: int) -> LpModel:
    """Single-scenario ES program of analyst ``i`` (0-based)."""
    if not isinstance(i, (int, np.integer)) or not 0 <= i < p.n:
        raise IndexError(f"scenario index {i} out of range for {p.n} scenarios")
    r = p.returns[i]
    b = _Builder(f"ANALYST{i + 1}")
    _weights_block(b, p.m)
    b.var("c", 1.0, -INF, INF)
    coef = 1.0 / ((1.0 - p.alpha) * r.shape[0])
    for k in range(r.shape[0]):
        b.var(f"t{i + 1}_{k + 1}", coef, 0.0, INF)
    for k in range(r.shape[0]):
        terms = _loss_terms(r[k])
        terms.update({"c": -1.0, f"t{i + 1}_{k + 1}": -1.0})
        b.row(f"r{i + 1}_{k + 1}", terms, "L", 0.0)
    _portfolio_rows(b, p.theta[i], p.theta0, "G")
    return b.build()


def _is_number(v) -> bool:
    return isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) and math.isfinite(v)


def _classify_pieces(pieces, T: int) -> str:
    """'sample' for per-day (slope, intercept) pairs, 'vector' for (weights, intercept)."""
    kinds = set()
    if not isinstance(pieces, (list, tuple)) or not pieces:
        raise ValueError("each scenario needs a non-empty list of affine pieces")
    for pc in pieces:
        if not isinstance(pc, (list, tuple)) or len(pc) != 2 or not _is_number(pc[1]):
            raise ValueError(f"piece {pc!r} is not an affine (coefficients, intercept) pair")
        if _is_number(pc[0]):
            kinds.add("sample")
        else:
            w = np.asarray(pc[0])
            if w.dtype.kind not in "iuf" or w.shape != (T,) or not np.all(np.isfinite(w)):
                raise ValueError(f"piece weights must be {T} finite numbers")
            kinds.add("vector")
    if len(kinds) != 1:
        raise ValueError("pieces of one scenario must all be per-day or all be vector pieces")
    return kinds.pop()


def build_generic_regret_lp(pieces, p: PortfolioProblem) -> LpModel:
    """Epigraph LP for a regret that is a maximum of affine pieces.

    ``pieces[i]`` lists the affine pieces of scenario ``i``. A piece is
    either ``(slope, intercept)``, applied to each day's shifted loss and
    averaged over the days, or ``(weights, intercept)`` with one weight per
    day, applied to the whole shifted loss vector.
    """
    if len(pieces) != p.n:
        raise ValueError("one piece list per scenario is required")
    kinds = [_classify_pieces(pc, r.shape[0]) for pc, r in zip(pieces, p.returns)]
    b = _Builder("GENERIC")
    _weights_block(b, p.m)
    b.var("c", 1.0, -INF, INF)
    for i in range(p.n):
        b.var(f"b{i + 1}", 0.0, -INF, INF)
    for i, r in enumerate(p.returns):
        if kinds[i] == "sample":
            for k in range(r.shape[0]):
                b.var(f"t{i + 1}_{k + 1}", float(p.mu[i]) / r.shape[0], -INF, INF)
        else:
            b.var(f"t{i + 1}", float(p.mu[i]), -INF, INF)
    for i, r in enumerate(p.returns):
        for q, (coef, icpt) in enumerate(pieces[i]):
            if kinds[i] == "sample":
                # t_ik >= s (L_k - c - b_i) + beta
                s = float(coef)
                for k in range(r.shape[0]):
                    terms = _loss_terms(r[k], s)
                    terms.update({"c": -s, f"b{i + 1}": -s, f"t{i + 1}_{k + 1}": -1.0})
                    b.row(f"p{i + 1}_{k + 1}_{q + 1}", terms, "L", -float(icpt))
            else:
                w = np.asarray(coef, dtype=np.float64)
                wsum = math.fsum(w)
                terms = {f"x{j + 1}": -math.fsum(w * r[:, j]) for j in range(p.m)}
                terms.update({"c": -wsum, f"b{i + 1}": -wsum, f"t{i + 1}": -1.0})
                b.row(f"p{i + 1}_{q + 1}", terms, "L", -float(icpt))
    b.row("bsum", {f"b{i + 1}": float(p.mu[i]) for i in range(p.n)}, "E", 0.0)
    _portfolio_rows(b, p.theta_manager(), p.theta0, "E" if p.constraint_mode == "equality" else "G")
    return b.build()


def es_pieces(p: PortfolioProblem) -> list:
    """Per-day pieces {0, y/(1-alpha)} whose average is the ES regret."""
    return [[(0.0, 0.0), (1.0 / (1.0 - p.alpha), 0.0)] for _ in range(p.n)]


def es_of_portfolio(x, returns, alpha) -> float:
    """ES of the daily portfolio loss -returns @ x."""
    x = np.asarray(x, dtype=np.float64)
    # solver output may carry round-off below zero
    x = check_simplex(np.where((x < 0) & (x > -1e-9), 0.0, x), tol=1e-9)
    r = np.atleast_2d(np.asarray(returns, dtype=np.float64))
    if r.shape[1] != x.shape[0]:
        raise ValueError("weights must match the return columns")
    losses = np.array([-math.fsum(row * x) for row in r])
    return core.es_alpha(losses, alpha)


def portfolio_weights(model: LpModel, values) -> np.ndarray:
    """Asset weights of a solved portfolio model.

    Warns when a weight sits at 1, the closure of the open bound x < 1.
    """
    idx = [j for j, v in enumerate(model.variables) if v.startswith("x") and v[1:].isdigit()]
    x = np.asarray(values, dtype=np.float64)[idx]
    hit = np.flatnonzero(x >= 1.0 - CORNER_TOL)
    if hit.shape[0] and x.shape[0] > 1:
        warnings.warn(f"weight of asset {int(hit[0]) + 1} is within {CORNER_TOL} of 1", RuntimeWarning, stacklevel=2)
    return x
