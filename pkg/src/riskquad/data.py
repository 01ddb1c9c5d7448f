"""Market data ingestion and analyst scenario construction.

Prices come as a wide CSV (``date,<ticker1>,<ticker2>,...``), macro series
as ``date,value``. Each analyst picks the training days on which a macro
indicator sits above (or at/below) its window median and estimates
expected returns from those days only.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import logging
import math
import urllib.error
import urllib.parse
import urllib.request
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import check_simplex

log = logging.getLogger(__name__)

MAX_MISSING = 0.05
INDICATORS = ("rate_above_median", "rate_below_median", "cpi_above_median", "cpi_below_median", "custom_mask")
MISSING_TOKENS = ("", ".", "na", "nan", "null", "n/a")


class DataError(ValueError):
    """Bad or missing input data."""


class FetchError(DataError):
    """HTTP failure while fetching one ticker."""

    def __init__(self, ticker, reason):
        super().__init__(f"fetch failed for {ticker}: {reason}")
        self.ticker = ticker


class MalformedDataError(DataError):
    pass


class EmptyDataError(DataError):
    pass


def _parse_date(s: str, where: str = "") -> dt.date:
    try:
        return dt.date.fromisoformat(s.strip())
    except ValueError:
        raise MalformedDataError(f"{where}bad ISO date {s!r}") from None


def _check_dates(dates, what):
    parsed = [_parse_date(d, f"{what}: ") for d in dates]
    if any(b <= a for a, b in zip(parsed, parsed[1:])):
        raise DataError(f"{what}: dates must be strictly increasing")
    return tuple(d.isoformat() for d in parsed)


@dataclass(frozen=True)
class PriceTable:
    dates: tuple
    tickers: tuple
    prices: np.ndarray  # (dates, tickers)

    def __post_init__(self):
        object.__setattr__(self, "dates", _check_dates(self.dates, "prices"))
        object.__setattr__(self, "tickers", tuple(self.tickers))
        p = np.array(self.prices, dtype=np.float64)
        if p.ndim != 2 or p.shape != (len(self.dates), len(self.tickers)):
            raise DataError("price matrix shape does not match dates x tickers")
        if len(set(self.tickers)) != len(self.tickers):
            raise DataError("duplicate tickers")
        if not np.all(np.isfinite(p)) or np.any(p <= 0):
            raise DataError("prices must be finite and positive")
        p.setflags(write=False)
        object.__setattr__(self, "prices", p)

    def select(self, tickers) -> "PriceTable":
        idx = [self.tickers.index(t) for t in tickers]
        return PriceTable(self.dates, tuple(tickers), self.prices[:, idx])


@dataclass(frozen=True)
class MacroSeries:
    name: str
    dates: tuple
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", _check_dates(self.dates, self.name))
        v = np.array(self.values, dtype=np.float64).ravel()
        if v.shape[0] != len(self.dates) or v.shape[0] == 0:
            raise DataError(f"{self.name}: need one value per date")
        if not np.all(np.isfinite(v)):
            raise DataError(f"{self.name}: values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class AnalystRule:
    indicator: str
    source: str = ""  # macro series key, unused for custom_mask
    mask: tuple | None = None

    def __post_init__(self):
        if self.indicator not in INDICATORS:
            raise ValueError(f"unknown indicator {self.indicator!r}")
        if self.indicator == "custom_mask" and self.mask is None:
            raise ValueError("custom_mask needs a mask")


@dataclass(frozen=True)
class ReturnTable:
    dates: tuple  # date of each return (the later price date)
    tickers: tuple
    returns: np.ndarray

    def __post_init__(self):
        r = np.array(self.returns, dtype=np.float64)
        if r.shape != (len(self.dates), len(self.tickers)):
            raise DataError("return matrix shape does not match dates x tickers")
        if not np.all(np.isfinite(r)) or np.any(r <= -1.0):
            raise DataError("returns must be finite and greater than -1")
        r.setflags(write=False)
        object.__setattr__(self, "returns", r)
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "tickers", tuple(self.tickers))

    def rows(self, mask) -> np.ndarray:
        return self.returns[np.asarray(mask, dtype=bool)]


def _to_float(cell: str, where: str) -> float:
    s = cell.strip()
    if s.lower() in MISSING_TOKENS:
        return math.nan
    try:
        v = float(s)
    except ValueError:
        raise MalformedDataError(f"{where}: not a number: {cell!r}") from None
    if not math.isfinite(v):
        raise MalformedDataError(f"{where}: non-finite value {cell!r}")
    return v


def clean_prices(dates, tickers, matrix, max_missing: float = MAX_MISSING) -> PriceTable:
    """Drop sparse tickers, trim a ragged start and forward-fill the rest."""
    M = np.array(matrix, dtype=np.float64)
    if M.shape[0] == 0 or M.shape[1] == 0:
        raise EmptyDataError("no price data")
    keep = []
    for j, t in enumerate(tickers):
        frac = float(np.mean(np.isnan(M[:, j])))
        if frac > max_missing:
            warnings.warn(f"dropping {t}: {frac:.1%} of days missing", RuntimeWarning, stacklevel=2)
        else:
            keep.append(j)
    if not keep:
        raise EmptyDataError("every ticker was dropped for missing data")
    M = M[:, keep]
    tickers = [tickers[j] for j in keep]
    start = 0
    while start < M.shape[0] and np.any(np.isnan(M[start])):
        start += 1
    if start == M.shape[0]:
        raise EmptyDataError("no date has prices for every kept ticker")
    if start:
        warnings.warn(f"trimming {start} leading dates with incomplete prices", RuntimeWarning, stacklevel=2)
    M = M[start:]
    for k in range(1, M.shape[0]):
        gap = np.isnan(M[k])
        M[k, gap] = M[k - 1, gap]
    return PriceTable(tuple(dates[start:]), tuple(tickers), M)


def read_prices_csv(text: str, where: str = "prices", max_missing: float = MAX_MISSING) -> PriceTable:
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise EmptyDataError(f"{where}: empty file")
    head = [h.strip() for h in rows[0]]
    if len(head) < 2 or head[0].lower() != "date":
        raise MalformedDataError(f"{where}: header must be date,<ticker>,...")
    if len(rows) == 1:
        raise EmptyDataError(f"{where}: no data rows")
    dates, mat = [], []
    for n, r in enumerate(rows[1:], 2):
        if len(r) != len(head):
            raise MalformedDataError(f"{where}: line {n} has {len(r)} fields, expected {len(head)}")
        dates.append(r[0].strip())
        mat.append([_to_float(c, f"{where}: line {n}") for c in r[1:]])
    dates = _check_dates(dates, where)
    return clean_prices(dates, head[1:], mat, max_missing)


def load_prices(path) -> PriceTable:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise DataError(f"cannot read {path}: {e.strerror}") from None
    return read_prices_csv(text, str(path))


def read_macro_csv(text: str, name: str = "macro") -> MacroSeries:
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise EmptyDataError(f"{name}: empty file")
    head = [h.strip().lower() for h in rows[0]]
    if len(head) != 2 or head[0] != "date":
        raise MalformedDataError(f"{name}: header must be date,value")
    dates, vals = [], []
    for n, r in enumerate(rows[1:], 2):
        if len(r) != 2:
            raise MalformedDataError(f"{name}: line {n} has {len(r)} fields, expected 2")
        v = _to_float(r[1], f"{name}: line {n}")
        if math.isnan(v):
            continue  # unpublished observation
        dates.append(r[0].strip())
        vals.append(v)
    if not vals:
        raise EmptyDataError(f"{name}: no observations")
    return MacroSeries(name, tuple(dates), np.array(vals))


def load_macro(path, name: str | None = None) -> MacroSeries:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise DataError(f"cannot read {path}: {e.strerror}") from None
    return read_macro_csv(text, name or path.stem)


def compute_returns(p: PriceTable) -> ReturnTable:
    """Simple daily returns p_t / p_{t-1} - 1."""
    if len(p.dates) < 2:
        raise DataError("need at least two dates to compute returns")
    P = p.prices
    return ReturnTable(p.dates[1:], p.tickers, P[1:] / P[:-1] - 1.0)


def align_macro(m: MacroSeries, dates) -> np.ndarray:
    """Macro value in force on each date (last observation on or before it)."""
    obs = [dt.date.fromisoformat(d) for d in m.dates]
    out = np.empty(len(dates))
    j = -1
    for k, d in enumerate(dt.date.fromisoformat(x) for x in dates):
        while j + 1 < len(obs) and obs[j + 1] <= d:
            j += 1
        if j < 0:
            raise DataError(f"{m.name} has no observation on or before {d.isoformat()}")
        out[k] = m.values[j]
    return out


def year_over_year(m: MacroSeries) -> MacroSeries:
    """Relative change against the value in force one year earlier."""
    obs = [dt.date.fromisoformat(d) for d in m.dates]
    dates, vals = [], []
    j = -1
    for k, d in enumerate(obs):
        try:
            back = d.replace(year=d.year - 1)
        except ValueError:  # 29 February
            back = d.replace(year=d.year - 1, day=28)
        while j + 1 < len(obs) and obs[j + 1] <= back:
            j += 1
        if j >= 0:
            dates.append(m.dates[k])
            vals.append(m.values[k] / m.values[j] - 1.0)
    if not vals:
        raise DataError(f"{m.name}: less than one year of history for the year-over-year change")
    return MacroSeries(f"{m.name}_yoy", tuple(dates), np.array(vals))


def lower_median(values) -> float:
    v = sorted(float(x) for x in values)
    return v[(len(v) - 1) // 2]


def select_periods(m: MacroSeries | None, rule: AnalystRule, window_dates) -> np.ndarray:
    """Boolean mask over ``window_dates`` for one analyst.

    The median of an even count is the lower middle value; days equal to the
    median count as "below", never as "above".
    """
    n = len(window_dates)
    if rule.indicator == "custom_mask":
        mask = np.asarray(rule.mask, dtype=bool)
        if mask.shape != (n,):
            raise DataError(f"custom mask has length {mask.shape[0]}, window has {n} days")
        return mask.copy()
    if m is None:
        raise DataError(f"rule {rule.indicator} needs a macro series")
    series = year_over_year(m) if rule.indicator.startswith("cpi") else m
    vals = align_macro(series, window_dates)
    med = lower_median(vals)
    return vals > med if rule.indicator.endswith("above_median") else vals <= med


def estimate_theta(r: ReturnTable | np.ndarray, mask) -> np.ndarray:
    """Per-asset mean return over the selected days (exactly rounded sums)."""
    R = r.returns if isinstance(r, ReturnTable) else np.atleast_2d(np.asarray(r, dtype=np.float64))
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (R.shape[0],):
        raise DataError("mask length must match the number of days")
    sel = R[mask]
    if sel.shape[0] == 0:
        raise DataError("mask selects no days")
    return np.array([math.fsum(sel[:, j]) / sel.shape[0] for j in range(R.shape[1])])


def manager_theta(thetas, mu) -> np.ndarray:
    mu = check_simplex(mu)
    T = [np.asarray(t, dtype=np.float64).ravel() for t in thetas]
    if len(T) != mu.shape[0] or len({t.shape[0] for t in T}) != 1:
        raise ValueError("need one equal-length theta vector per weight")
    return np.array([math.fsum(mu[i] * T[i][j] for i in range(len(T))) for j in range(T[0].shape[0])])


def _pick_close_column(head):
    low = [h.strip().lower() for h in head]
    for want in ("adj close", "adj_close", "adjclose", "adjusted_close", "close", "value", "price"):
        if want in low:
            return low.index(want)
    if len(low) == 2:
        return 1
    return -1


def _fetch_one(url: str, ticker: str, timeout: float):
    try:
        with urllib.request.urlopen(url, timeout=timeout) as resp:
            body = resp.read().decode("utf-8")
    except urllib.error.HTTPError as e:
        raise FetchError(ticker, f"HTTP {e.code}") from None
    except (urllib.error.URLError, OSError) as e:
        raise FetchError(ticker, str(getattr(e, "reason", e))) from None
    rows = [r for r in csv.reader(io.StringIO(body)) if r and any(c.strip() for c in r)]
    if not rows:
        return {}
    head = rows[0]
    if not head or head[0].strip().lower() != "date":
        raise MalformedDataError(f"{ticker}: response has no date column")
    col = _pick_close_column(head)
    if col < 1:
        raise MalformedDataError(f"{ticker}: response has no close column")
    out = {}
    for n, r in enumerate(rows[1:], 2):
        if len(r) != len(head):
            raise MalformedDataError(f"{ticker}: line {n} has {len(r)} fields, expected {len(head)}")
        d = _parse_date(r[0], f"{ticker}: ").isoformat()
        v = _to_float(r[col], f"{ticker}: line {n}")
        if not math.isnan(v):
            out[d] = v
    return out


def fetch_prices(endpoint: str, tickers, start: str, end: str, timeout: float = 30.0, workers: int = 4) -> PriceTable:
    """Download one CSV per ticker and assemble a date-aligned table.

    ``endpoint`` is a template with ``{ticker}``, ``{start}`` and ``{end}``
    fields. Tickers with no rows in range are dropped with a warning like
    any other ticker missing more than 5% of the days.
    """
    lo, hi = _parse_date(start), _parse_date(end)
    if hi < lo:
        raise DataError("end date precedes start date")
    tickers = list(tickers)
    if not tickers:
        raise DataError("no tickers requested")
    urls = [
        endpoint.format(ticker=urllib.parse.quote(t, safe=""), start=lo.isoformat(), end=hi.isoformat())
        for t in tickers
    ]
    with ThreadPoolExecutor(max_workers=max(1, min(workers, len(tickers)))) as pool:
        # map keeps request order, so assembly does not depend on completion order
        series = list(pool.map(lambda a: _fetch_one(a[0], a[1], timeout), zip(urls, tickers)))
    inrange = [{d: v for d, v in s.items() if lo.isoformat() <= d <= hi.isoformat()} for s in series]
    dates = sorted(set().union(*inrange))
    if not dates:
        raise EmptyDataError("no prices returned for any ticker in the requested range")
    mat = [[s.get(d, math.nan) for s in inrange] for d in dates]
    log.info("fetched %d tickers over %d dates", len(tickers), len(dates))
    return clean_prices(dates, tickers, mat)


def write_prices_csv(p: PriceTable, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["date", *p.tickers])
        for d, row in zip(p.dates, p.prices):
            w.writerow([d, *(repr(float(v)) for v in row)])


def write_macro_csv(m: MacroSeries, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["date", "value"])
        for d, v in zip(m.dates, m.values):
            w.writerow([d, repr(float(v))])
