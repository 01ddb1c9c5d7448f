"""Bounded-variable revised simplex.

Rows are turned into equalities with one slack per row; slacks carry the
row sense in their bounds. Rows whose slack cannot absorb the starting
residual get an artificial column, driven to zero in phase 1 and fixed at
zero afterwards. The basis inverse is kept explicitly, updated by rank-one
pivots and refactored every ``REFACTOR`` pivots. Pricing is Dantzig's rule,
switching to Bland's rule after a run of degenerate pivots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from .model import LpModel

REFACTOR = 100
DEGENERATE_RUN = 50
PIVOT_TOL = 1e-9
INF = math.inf

# status codes of the kernels
BASIC, AT_LOWER, AT_UPPER, FREE, FIXED = 0, 1, 2, 3, 4


@dataclass
class LpSolution:
    status: str  # optimal, infeasible, unbounded, numerical_failure, iteration_limit
    objective: float = math.nan
    x: np.ndarray = field(default_factory=lambda: np.zeros(0))
    residual: float = math.nan
    duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    reduced_costs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    duality_gap: float = math.nan
    iterations: int = 0
    tol: float = 1e-8
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    def value(self, model: LpModel, name: str) -> float:
        return float(self.x[model.column(name)])


def _mv(A, v):
    # plain loops rather than BLAS: the result must not depend on thread count
    return np.einsum("ij,j->i", A, v)


def _vm(v, A):
    return np.einsum("i,ij->j", v, A)


class _Tableau:
    def __init__(self, model: LpModel, tol: float):
        A = model.matrix()
        mr, nv = A.shape
        self.mr, self.nv, self.tol = mr, nv, tol
        self.rhs = np.array([r.rhs for r in model.rows], dtype=np.float64)
        slo = np.array([0.0 if r.sense in "LE" else -INF for r in model.rows])
        shi = np.array([0.0 if r.sense in "GE" else INF for r in model.rows])
        lb = np.concatenate([np.asarray(model.lower, dtype=np.float64), slo, np.zeros(mr)])
        ub = np.concatenate([np.asarray(model.upper, dtype=np.float64), shi, np.zeros(mr)])

        x = np.zeros(nv + 2 * mr)
        status = np.full(nv + 2 * mr, FIXED, dtype=np.int8)
        for j in range(nv + mr):
            if lb[j] == ub[j]:
                x[j], status[j] = lb[j], FIXED
            elif math.isfinite(lb[j]):
                x[j], status[j] = lb[j], AT_LOWER
            elif math.isfinite(ub[j]):
                x[j], status[j] = ub[j], AT_UPPER
            else:
                x[j], status[j] = 0.0, FREE
        resid = self.rhs - _mv(A, x[:nv])
        sign = np.ones(mr)
        basis = np.empty(mr, dtype=np.int64)
        self.phase1 = np.zeros(nv + 2 * mr)
        for i in range(mr):
            s = nv + i
            if slo[i] <= resid[i] <= shi[i]:
                basis[i] = s
                x[s] = resid[i]
                status[s] = BASIC
            else:
                # slack stays at the bound nearest the residual, an artificial covers the rest
                x[s] = slo[i] if resid[i] < slo[i] else shi[i]
                gap = resid[i] - x[s]
                sign[i] = 1.0 if gap > 0 else -1.0
                a = nv + mr + i
                basis[i] = a
                x[a] = abs(gap)
                ub[a] = INF
                status[a] = BASIC
                self.phase1[a] = 1.0
        self.A, self.sign = A, sign
        self.lb, self.ub, self.x, self.status, self.basis = lb, ub, x, status, basis
        self.cost = np.concatenate([np.asarray(model.objective, dtype=np.float64), np.zeros(2 * mr)])
        self.iterations = 0

    def column(self, j: int) -> np.ndarray:
        if j < self.nv:
            return self.A[:, j]
        col = np.zeros(self.mr)
        if j < self.nv + self.mr:
            col[j - self.nv] = 1.0
        else:
            i = j - self.nv - self.mr
            col[i] = self.sign[i]
        return col

    def times_columns(self, v: np.ndarray) -> np.ndarray:
        """v^T M for the full column set [A | I | diag(sign)]."""
        return np.concatenate([_vm(v, self.A), v, v * self.sign])

    def product(self, x: np.ndarray) -> np.ndarray:
        nv, mr = self.nv, self.mr
        return _mv(self.A, x[:nv]) + x[nv : nv + mr] + self.sign * x[nv + mr :]

    def refactor(self) -> bool:
        B = np.column_stack([self.column(j) for j in self.basis]) if self.mr else np.zeros((0, 0))
        try:
            binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            return False
        if not np.all(np.isfinite(binv)):
            return False
        self.binv = np.ascontiguousarray(binv)
        xn = self.x.copy()
        xn[self.basis] = 0.0
        self.x[self.basis] = _mv(self.binv, self.rhs - self.product(xn))
        return True

    def run(self, cost: np.ndarray, max_iter: int) -> str:
        if self.mr == 0:
            # no rows: each variable independently goes to its cheaper bound
            for j in range(self.nv):
                if cost[j] > 0:
                    if not math.isfinite(self.lb[j]):
                        return "unbounded"
                    self.x[j] = self.lb[j]
                elif cost[j] < 0:
                    if not math.isfinite(self.ub[j]):
                        return "unbounded"
                    self.x[j] = self.ub[j]
            return "optimal"
        if not self.refactor():
            return "numerical_failure"
        since, degenerate, fresh = 0, 0, True
        while self.iterations < max_iter:
            if since >= REFACTOR:
                if not self.refactor():
                    return "numerical_failure"
                since, fresh = 0, True
            y = _vm(cost[self.basis], self.binv)
            d = cost - self.times_columns(y)
            d[self.basis] = 0.0
            bland = degenerate >= DEGENERATE_RUN
            q, direction = kernels.price(d, self.status, self.tol, bland)
            if q < 0:
                if fresh:
                    return "optimal"
                # confirm optimality against a fresh factorisation
                if not self.refactor():
                    return "numerical_failure"
                since, fresh = 0, True
                continue
            self.iterations += 1
            aq = _mv(self.binv, self.column(q))
            delta = -direction * aq
            xb = self.x[self.basis]
            r, step = kernels.ratio_test(
                xb, self.lb[self.basis], self.ub[self.basis], delta, self.basis, PIVOT_TOL, bland
            )
            span = self.ub[q] - self.lb[q]
            if r < 0 and not math.isfinite(span):
                return "unbounded"
            if span <= step:
                # bound flip, no basis change
                self.x[self.basis] = xb + delta * span
                if self.status[q] == AT_LOWER:
                    self.x[q], self.status[q] = self.ub[q], AT_UPPER
                else:
                    self.x[q], self.status[q] = self.lb[q], AT_LOWER
                degenerate = 0 if span > 0 else degenerate + 1
                fresh = False
                continue
            if abs(aq[r]) < PIVOT_TOL:
                if fresh:
                    return "numerical_failure"
                if not self.refactor():
                    return "numerical_failure"
                since, fresh = 0, True
                continue
            self.x[self.basis] = xb + delta * step
            leaving = int(self.basis[r])
            if delta[r] < 0:
                self.x[leaving] = self.lb[leaving]
            else:
                self.x[leaving] = self.ub[leaving]
            if self.lb[leaving] == self.ub[leaving]:
                self.status[leaving] = FIXED
            else:
                self.status[leaving] = AT_LOWER if delta[r] < 0 else AT_UPPER
            self.x[q] = self.x[q] + direction * step
            self.status[q] = BASIC
            self.basis[r] = q
            kernels.eta_update(self.binv, aq, r)
            degenerate = degenerate + 1 if step <= 1e-12 else 0
            since += 1
            fresh = False
        return "iteration_limit"


def _residual(model: LpModel, x: np.ndarray) -> float:
    worst = 0.0
    A = model.matrix()
    act = _mv(A, x) if A.size else np.zeros(len(model.rows))
    for row, a in zip(model.rows, act):
        if row.sense == "L":
            v = a - row.rhs
        elif row.sense == "G":
            v = row.rhs - a
        else:
            v = abs(a - row.rhs)
        worst = max(worst, v)
    lo = np.asarray(model.lower, dtype=np.float64)
    hi = np.asarray(model.upper, dtype=np.float64)
    if x.shape[0]:
        worst = max(worst, float(np.max(lo - x, initial=0.0)), float(np.max(x - hi, initial=0.0)))
    return float(worst)


def solve(model: LpModel, tol: float = 1e-8, max_iter: int | None = None) -> LpSolution:
    """Minimise ``model``; never raises on numerical trouble, reports it instead."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    t = _Tableau(model, tol)
    nv, mr = t.nv, t.mr
    limit = max_iter if max_iter is not None else 50 * (nv + 2 * mr) + 1000

    if np.any(t.phase1):
        status = t.run(t.phase1, limit)
        if status != "optimal":
            # phase 1 is bounded below by zero, so anything else is numerical
            return LpSolution(status if status != "unbounded" else "numerical_failure", iterations=t.iterations, tol=tol,
                              message=f"phase 1 ended with {status}")
        art = t.x[nv + mr :]
        infeas = float(art.sum())
        if infeas > tol * max(1.0, float(np.max(np.abs(t.rhs), initial=0.0))):
            return LpSolution("infeasible", iterations=t.iterations, tol=tol,
                              message=f"phase 1 infeasibility {infeas:.3e}")
        for a in range(nv + mr, nv + 2 * mr):
            t.ub[a] = 0.0
            t.x[a] = 0.0 if t.status[a] != BASIC else t.x[a]
            if t.status[a] != BASIC:
                t.status[a] = FIXED

    status = t.run(t.cost, limit)
    if status != "optimal":
        return LpSolution(status, iterations=t.iterations, tol=tol, message=f"phase 2 ended with {status}")

    x = t.x[:nv].copy()
    res = _residual(model, x)
    if t.mr:
        y = _vm(t.cost[t.basis], t.binv)
        d = (t.cost - t.times_columns(y))[:nv]
        d[t.basis[t.basis < nv]] = 0.0
    else:
        y, d = np.zeros(0), t.cost[:nv].copy()
    obj = model.evaluate(x)
    # dual objective: y.rhs plus reduced costs at the active bounds
    dual = math.fsum(list(y * t.rhs) + [float(v) * float(xv) for v, xv in zip(d, x) if v != 0.0] + [model.objective_offset])
    gap = abs(obj - dual)
    scale = max(1.0, float(np.max(np.abs(t.rhs), initial=0.0)), float(np.max(np.abs(x), initial=0.0)))
    if res > tol * scale:
        return LpSolution("numerical_failure", obj, x, res, y, d, gap, t.iterations, tol,
                          message=f"primal residual {res:.3e} exceeds tolerance")
    return LpSolution("optimal", obj, x, res, y, d, gap, t.iterations, tol)
