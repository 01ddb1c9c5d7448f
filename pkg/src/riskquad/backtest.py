"""Train/test backtests of the analyst and manager ES portfolios.

Each analyst's scenario sample is the set of training days selected by
its macro rule; the manager mixes the analysts' samples with the
scenario weights. Portfolios are fixed at the cutoff and evaluated on the
remaining days of the window.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import itertools
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import data as D
from .core import check_level, check_simplex
from .lp import PortfolioProblem, build_analyst_lp, build_manager_lp, portfolio_weights, solve

PERIODS_PER_YEAR = 252
MANAGER = "Manager"
INDEX = "Index"
GRID_KEYS = ("window", "alpha", "theta0_scale", "universe")


class UndefinedRatio(ValueError):
    """A performance ratio whose denominator vanishes."""


@dataclass(frozen=True)
class Analyst:
    name: str
    rule: D.AnalystRule
    weight: float


@dataclass(frozen=True)
class BacktestConfig:
    cutoff: str
    window: int
    alpha: float
    theta0: object  # float, {"month": "YYYY-MM"} or {"cumulative": c, "days": n}
    analysts: tuple
    risk_free: float = 0.0365
    theta0_scale: float = 1.0
    end: str | None = None
    universe: str = "default"
    regime: str = ""
    manager_mode: str = "equality"
    analyst_mode: str = "at_least"
    periods_per_year: int = PERIODS_PER_YEAR
    rf_compounding: str = "arithmetic"
    downside: str = "full"
    tol: float = 1e-8

    def __post_init__(self):
        _parse_day(self.cutoff, "cutoff")
        if self.end is not None:
            _parse_day(self.end, "end")
        if not isinstance(self.window, (int, np.integer)) or self.window < 2:
            raise ValueError("window must be an integer >= 2")
        check_level(self.alpha)
        if not self.analysts:
            raise ValueError("at least one analyst is required")
        check_simplex([a.weight for a in self.analysts])
        if len({a.name for a in self.analysts}) != len(self.analysts) or MANAGER in {a.name for a in self.analysts}:
            raise ValueError("analyst names must be unique and differ from the manager")
        if not (math.isfinite(self.theta0_scale) and self.theta0_scale > 0):
            raise ValueError("theta0_scale must be positive")
        if self.manager_mode not in ("equality", "at_least") or self.analyst_mode not in ("equality", "at_least"):
            raise ValueError("constraint modes are 'equality' or 'at_least'")
        if self.rf_compounding not in ("arithmetic", "geometric"):
            raise ValueError("rf_compounding is 'arithmetic' or 'geometric'")
        if self.downside not in ("full", "below_only"):
            raise ValueError("downside is 'full' or 'below_only'")
        if self.periods_per_year < 1:
            raise ValueError("periods_per_year must be positive")
        check_theta0_spec(self.theta0)

    @property
    def mu(self) -> np.ndarray:
        return np.array([a.weight for a in self.analysts])

    def params(self) -> dict:
        return {
            "regime": self.regime,
            "universe": self.universe,
            "window": int(self.window),
            "alpha": float(self.alpha),
            "theta0_scale": float(self.theta0_scale),
        }


@dataclass
class Market:
    """Prices per universe (with an optional index) and macro series by key."""

    universes: dict
    macro: dict
    indices: dict = field(default_factory=dict)

    def prices(self, universe: str) -> D.PriceTable:
        if universe not in self.universes:
            raise D.DataError(f"unknown universe {universe!r}")
        return self.universes[universe]


@dataclass
class PortfolioResult:
    name: str
    status: str
    weights: np.ndarray | None = None
    objective: float | None = None
    daily: np.ndarray | None = None
    two_month_return: float | None = None
    sharpe: float | None = None
    sortino: float | None = None
    message: str = ""


@dataclass
class BacktestReport:
    params: dict
    theta0: float | None
    tickers: tuple
    train_dates: tuple
    test_dates: tuple
    portfolios: list
    index_return: float | None
    index_daily: np.ndarray | None = None
    error: str = ""

    def portfolio(self, name: str) -> PortfolioResult:
        for p in self.portfolios:
            if p.name == name:
                return p
        raise KeyError(name)


def _parse_day(s, what) -> dt.date:
    try:
        return dt.date.fromisoformat(str(s))
    except ValueError:
        raise ValueError(f"{what}: bad ISO date {s!r}") from None


def check_theta0_spec(spec):
    if isinstance(spec, bool):
        raise ValueError("theta0 must be a number or a month/cumulative spec")
    if isinstance(spec, (int, float)):
        if not math.isfinite(spec):
            raise ValueError("theta0 must be finite")
        return
    if isinstance(spec, dict):
        if set(spec) == {"month"}:
            try:
                dt.date.fromisoformat(f"{spec['month']}-01")
            except (TypeError, ValueError):
                raise ValueError(f"theta0 month must be YYYY-MM, got {spec['month']!r}") from None
            return
        if set(spec) == {"cumulative", "days"}:
            if not isinstance(spec["days"], int) or spec["days"] < 1 or not math.isfinite(spec["cumulative"]):
                raise ValueError("theta0 cumulative spec needs a finite return and a positive day count")
            return
    raise ValueError(f"bad theta0 spec {spec!r}")


def split(r: D.ReturnTable, cutoff: str, T: int, end: str | None = None):
    """Window of the last ``T`` return days up to ``end``, cut at ``cutoff``.

    Train holds the window days strictly before the cutoff, test the days
    on or after it.
    """
    last = len(r.dates) if end is None else sum(1 for d in r.dates if d <= _parse_day(end, "end").isoformat())
    if last < T:
        raise D.DataError(f"window of {T} days needs more data: only {last} return days up to the end date")
    dates = r.dates[last - T : last]
    cut = _parse_day(cutoff, "cutoff").isoformat()
    if cut <= dates[0]:
        raise D.DataError(f"cutoff {cut} is not after the window start {dates[0]}: empty training set")
    k = sum(1 for d in dates if d < cut)
    if k == T:
        raise D.DataError(f"cutoff {cut} is after the window end {dates[-1]}: empty test set")
    rows = r.returns[last - T : last]
    train = D.ReturnTable(dates[:k], r.tickers, rows[:k])
    test = D.ReturnTable(dates[k:], r.tickers, rows[k:])
    return train, test


def proxy_index(prices: D.PriceTable) -> D.PriceTable:
    """Equal-weight, daily rebalanced index of a universe (used when no index file is given)."""
    r = compute_mean_returns(prices)
    levels = [100.0]
    for v in r:
        levels.append(levels[-1] * (1.0 + v))
    return D.PriceTable(prices.dates, ("INDEX",), np.array(levels)[:, None])


def compute_mean_returns(prices: D.PriceTable) -> np.ndarray:
    R = D.compute_returns(prices).returns
    return np.array([math.fsum(row) / row.shape[0] for row in R])


def resolve_theta0(spec, index: D.PriceTable | None = None, train_dates=None) -> float:
    """Target daily return.

    A number passes through. ``{"cumulative": c, "days": n}`` gives c / n.
    ``{"month": "YYYY-MM"}`` divides the index's cumulative return over that
    month by the month's trading-day count; the month must lie inside the
    training period.
    """
    check_theta0_spec(spec)
    if not isinstance(spec, dict):
        return float(spec)
    if "cumulative" in spec:
        return float(spec["cumulative"]) / spec["days"]
    if index is None:
        raise D.DataError("theta0 month spec needs an index series")
    month = str(spec["month"])
    idx = [k for k, d in enumerate(index.dates) if d[:7] == month and k > 0]
    if not idx:
        raise D.DataError(f"theta0 month {month} is absent from the index data")
    if train_dates is not None:
        train = set(train_dates)
        outside = [index.dates[k] for k in idx if index.dates[k] not in train]
        if outside:
            raise D.DataError(f"theta0 month {month} is not inside the training period ({outside[0]})")
    lv = index.prices[:, 0]
    cumulative = float(lv[idx[-1]] / lv[idx[0] - 1]) - 1.0
    return cumulative / len(idx)


def _rf_daily(rf_annual: float, periods: int, compounding: str) -> float:
    if compounding == "geometric":
        return (1.0 + rf_annual) ** (1.0 / periods) - 1.0
    return rf_annual / periods


def sharpe(daily, rf_annual: float, periods: int = PERIODS_PER_YEAR, compounding: str = "arithmetic") -> float:
    """Annualised Sharpe ratio with the sample (n-1) standard deviation."""
    x = np.asarray(daily, dtype=np.float64).ravel()
    if x.shape[0] < 2:
        raise UndefinedRatio("Sharpe ratio needs at least two returns")
    rf = _rf_daily(rf_annual, periods, compounding)
    mean = math.fsum(x) / x.shape[0]
    var = math.fsum((x - mean) ** 2) / (x.shape[0] - 1)
    if var == 0.0:
        raise UndefinedRatio("zero standard deviation")
    return (mean - rf) / math.sqrt(var) * math.sqrt(periods)


def sortino(daily, rf_annual: float, periods: int = PERIODS_PER_YEAR, compounding: str = "arithmetic", downside: str = "full") -> float:
    """Annualised Sortino ratio.

    The downside deviation averages squared shortfalls below the daily
    risk-free rate over all days (``full``) or only over the shortfall days
    (``below_only``).
    """
    x = np.asarray(daily, dtype=np.float64).ravel()
    if x.shape[0] < 1:
        raise UndefinedRatio("Sortino ratio needs returns")
    rf = _rf_daily(rf_annual, periods, compounding)
    short = np.minimum(x - rf, 0.0)
    below = short < 0.0
    if not np.any(below):
        raise UndefinedRatio("no return below the risk-free rate")
    count = x.shape[0] if downside == "full" else int(below.sum())
    dd = math.sqrt(math.fsum(short**2) / count)
    mean = math.fsum(x) / x.shape[0]
    return (mean - rf) / dd * math.sqrt(periods)


def compound(daily) -> float:
    acc = 1.0
    for v in np.asarray(daily, dtype=np.float64).ravel():
        acc *= 1.0 + float(v)
    return acc - 1.0


def portfolio_daily(returns: np.ndarray, x: np.ndarray) -> np.ndarray:
    # exactly rounded per-day sums: the result does not depend on BLAS threading
    return np.array([math.fsum(row * x) for row in returns])


def _evaluate(res: PortfolioResult, test: D.ReturnTable, cfg: BacktestConfig):
    res.daily = portfolio_daily(test.returns, res.weights)
    res.two_month_return = compound(res.daily)
    try:
        res.sharpe = sharpe(res.daily, cfg.risk_free, cfg.periods_per_year, cfg.rf_compounding)
    except UndefinedRatio:
        res.sharpe = None
    try:
        res.sortino = sortino(res.daily, cfg.risk_free, cfg.periods_per_year, cfg.rf_compounding, cfg.downside)
    except UndefinedRatio:
        res.sortino = None


def _solve_portfolio(name, model, cfg, test) -> PortfolioResult:
    sol = solve(model, cfg.tol)
    if sol.status != "optimal":
        return PortfolioResult(name, sol.status, objective=None, message=sol.message)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        x = portfolio_weights(model, sol.x)
    # clip round-off so the reported weights sit exactly in [0, 1]
    x = np.clip(x, 0.0, 1.0)
    res = PortfolioResult(name, "optimal", x, sol.objective, message="; ".join(str(w.message) for w in caught))
    if test is not None:
        _evaluate(res, test, cfg)
    return res


@dataclass
class Prepared:
    """Everything fixed at the cutoff: the split, the target and the LPs."""

    cfg: BacktestConfig
    tickers: tuple
    train: D.ReturnTable
    test: D.ReturnTable
    index: D.PriceTable
    theta0: float
    models: list  # (portfolio name, LpModel), analysts first, manager last
    problem: PortfolioProblem | None = None
    no_data: str = ""


def prepare(cfg: BacktestConfig, market: Market) -> Prepared:
    """Split the data, resolve the target and build every portfolio LP."""
    prices = market.prices(cfg.universe)
    returns = D.compute_returns(prices)
    train, test = split(returns, cfg.cutoff, cfg.window, cfg.end)
    index = market.indices.get(cfg.universe) or proxy_index(prices)
    theta0 = resolve_theta0(cfg.theta0, index, train.dates) * cfg.theta0_scale

    samples, thetas, bad = [], [], []
    for a in cfg.analysts:
        src = market.macro.get(a.rule.source) if a.rule.source else None
        if a.rule.indicator != "custom_mask" and src is None:
            raise D.DataError(f"{a.name}: macro series {a.rule.source!r} not loaded")
        mask = D.select_periods(src, a.rule, train.dates)
        if not mask.any():
            bad.append(a.name)
            continue
        samples.append(train.rows(mask))
        thetas.append(D.estimate_theta(train, mask))
    prep = Prepared(cfg, prices.tickers, train, test, index, theta0, [])
    if bad:
        prep.no_data = ", ".join(bad) + " selects no training days"
        return prep

    p = PortfolioProblem(samples, thetas, theta0, cfg.alpha, cfg.mu, cfg.manager_mode, prices.tickers)
    ana = dataclasses.replace(p, constraint_mode=cfg.analyst_mode)
    for i, a in enumerate(cfg.analysts):
        model = build_analyst_lp(ana, i)
        if cfg.analyst_mode == "equality":
            model = _as_equality(model)
        prep.models.append((a.name, model))
    prep.models.append((MANAGER, build_manager_lp(p)))
    prep.problem = p
    return prep


def portfolio_names(cfg: BacktestConfig) -> list:
    return [a.name for a in cfg.analysts] + [MANAGER]


def run_backtest(cfg: BacktestConfig, market: Market) -> BacktestReport:
    prep = prepare(cfg, market)
    if prep.no_data:
        results = [PortfolioResult(name, "no_data", message=prep.no_data) for name in portfolio_names(cfg)]
    else:
        results = [_solve_portfolio(name, model, cfg, prep.test) for name, model in prep.models]

    test = prep.test
    idx_ret = D.compute_returns(prep.index)
    pos = {d: k for k, d in enumerate(idx_ret.dates)}
    if any(d not in pos for d in test.dates):
        index_daily, index_return = None, None
    else:
        index_daily = np.array([idx_ret.returns[pos[d], 0] for d in test.dates])
        index_return = compound(index_daily)
    params = cfg.params()
    params["theta0"] = prep.theta0
    return BacktestReport(params, prep.theta0, prep.tickers, prep.train.dates, test.dates, results, index_return, index_daily)


def _as_equality(model):
    from .lp import LpModel, LpRow

    rows = tuple(LpRow(r.name, r.index, r.value, "E", r.rhs) if r.name == "target" else r for r in model.rows)
    return LpModel(model.name, model.variables, model.objective, rows, model.lower, model.upper, model.objective_offset)


def grid_cells(base: BacktestConfig, overrides: dict | None, mode: str = "product") -> list:
    """Configurations of a sensitivity grid in deterministic order.

    ``product`` takes the Cartesian product of the override lists.
    ``one_at_a_time`` starts from the base and varies one parameter at a
    time (the layout of a baseline-plus-sensitivity table).
    """
    overrides = {k: list(v) for k, v in (overrides or {}).items() if v is not None}
    unknown = set(overrides) - set(GRID_KEYS)
    if unknown:
        raise ValueError(f"unknown override keys: {sorted(unknown)}")
    for k, vals in overrides.items():
        if not vals:
            raise ValueError(f"override {k} has no values")
    if mode == "product":
        keys = [k for k in GRID_KEYS if k in overrides]
        cells = [dataclasses.replace(base, **dict(zip(keys, combo))) for combo in itertools.product(*(overrides[k] for k in keys))]
        return cells or [base]
    if mode != "one_at_a_time":
        raise ValueError(f"unknown grid mode {mode!r}")
    cells = [base]
    for k in GRID_KEYS:
        for v in overrides.get(k, []):
            c = dataclasses.replace(base, **{k: v})
            if c not in cells:
                cells.append(c)
    return cells


def _run_cell(cfg, market) -> BacktestReport:
    try:
        return run_backtest(cfg, market)
    except (D.DataError, ValueError) as e:
        params = cfg.params()
        params["theta0"] = None
        return BacktestReport(params, None, (), (), (), [], None, error=str(e))


def sensitivity_grid(base: BacktestConfig, market: Market, overrides: dict | None = None, mode: str = "product", workers: int = 1) -> list:
    """One report per grid cell; failing cells are reported, not raised."""
    cells = grid_cells(base, overrides, mode)
    if workers <= 1:
        return [_run_cell(c, market) for c in cells]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda c: _run_cell(c, market), cells))
