"""Seeded synthetic market data: prices, an index, a 10-year yield and CPI.

Asset returns load on a market factor and on the level of the simulated
yield and inflation, so the four analyst rules pick out days with
genuinely different return distributions.
"""

from __future__ import annotations

import datetime as dt
import json
from pathlib import Path

import numpy as np

from .data import MacroSeries, PriceTable, write_macro_csv, write_prices_csv

# seeded fixture shipped with the package (regenerate with write_fixture)
FIXTURE_DIR = Path(__file__).resolve().parent / "fixture"
FIXTURE_CONFIG = FIXTURE_DIR / "config.json"


def business_days(start: str, end: str) -> list[str]:
    d, stop = dt.date.fromisoformat(start), dt.date.fromisoformat(end)
    out = []
    while d <= stop:
        if d.weekday() < 5:
            out.append(d.isoformat())
        d += dt.timedelta(days=1)
    return out


def month_starts(start: str, end: str) -> list[str]:
    d, stop = dt.date.fromisoformat(start).replace(day=1), dt.date.fromisoformat(end)
    out = []
    while d <= stop:
        out.append(d.isoformat())
        d = (d.replace(day=28) + dt.timedelta(days=4)).replace(day=1)
    return out


def _macro(rng, days, months):
    rate = 4.2 + np.cumsum(rng.normal(0.0, 0.035, size=len(days)))
    cpi = 300.0 * np.cumprod(1.0 + rng.normal(0.0025, 0.002, size=len(months)))
    return MacroSeries("rate", tuple(days), rate), MacroSeries("cpi", tuple(months), cpi)


def _universe(rng, prefix, n_assets, days, rate_daily, infl_daily):
    T = len(days)
    beta = rng.uniform(0.6, 1.4, size=n_assets)
    g_rate = rng.uniform(-1.0, 1.0, size=n_assets)
    g_infl = rng.uniform(-1.0, 1.0, size=n_assets)
    vol = rng.uniform(0.008, 0.025, size=n_assets)
    market = rng.normal(0.0004, 0.01, size=T)
    shock = rng.normal(size=(T, n_assets)) * vol
    rate_c = rate_daily - np.median(rate_daily)
    infl_c = infl_daily - np.median(infl_daily)
    r = 0.0002 + np.outer(market, beta) + 0.002 * np.outer(rate_c, g_rate) + 0.2 * np.outer(infl_c, g_infl) + shock
    r[0] = 0.0
    r = np.clip(r, -0.5, 0.5)
    start = rng.uniform(20.0, 300.0, size=n_assets)
    prices = np.round(start * np.cumprod(1.0 + r, axis=0), 6)
    tickers = tuple(f"{prefix}{j + 1:02d}" for j in range(n_assets))
    index = np.round(1000.0 * np.cumprod(1.0 + r.mean(axis=1)), 6)
    return PriceTable(tuple(days), tickers, prices), PriceTable(tuple(days), ("INDEX",), index[:, None])


def synthetic_market(seed: int, start: str, end: str, universes: dict) -> dict:
    """Build every series; ``universes`` maps a name to its asset count."""
    rng = np.random.default_rng(seed)
    days = business_days(start, end)
    first = dt.date.fromisoformat(start)
    months = month_starts((first - dt.timedelta(days=400)).isoformat(), end)
    rate, cpi = _macro(rng, days, months)
    # CPI year-over-year change on each trading day, for the return model
    cpi_dates = [dt.date.fromisoformat(d) for d in cpi.dates]
    infl = np.empty(len(days))
    for k, d in enumerate(days):
        dd = dt.date.fromisoformat(d)
        j = max(i for i, c in enumerate(cpi_dates) if c <= dd)
        infl[k] = cpi.values[j] / cpi.values[j - 12] - 1.0
    out = {"rate": rate, "cpi": cpi, "universes": {}}
    for name in sorted(universes):
        child = np.random.default_rng([seed, sum(map(ord, name))])
        out["universes"][name] = _universe(child, name[:2].upper(), universes[name], days, rate.values, infl)
    return out


def base_config(universe: str, cutoff: str, window: int, theta0) -> dict:
    return {
        "data": {
            "prices": f"prices_{universe}.csv",
            "index": f"index_{universe}.csv",
            "macro": {"rate": "rate.csv", "cpi": "cpi.csv"},
        },
        "analysts": [
            {"name": "Analyst 1", "rule": "rate_above_median", "source": "rate", "weight": 0.25},
            {"name": "Analyst 2", "rule": "rate_below_median", "source": "rate", "weight": 0.25},
            {"name": "Analyst 3", "rule": "cpi_above_median", "source": "cpi", "weight": 0.25},
            {"name": "Analyst 4", "rule": "cpi_below_median", "source": "cpi", "weight": 0.25},
        ],
        "universe": universe,
        "alpha": 0.95,
        "window": window,
        "cutoff": cutoff,
        "theta0": theta0,
        "risk_free": 0.0365,
        "seed": 0,
    }


def write_fixture(out_dir, seed: int = 1) -> Path:
    """Small fixture: 10 assets, 150 return days, one config."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    days = business_days("2024-08-22", "2025-03-31")[-151:]
    m = synthetic_market(seed, days[0], days[-1], {"fixture": 10})
    write_macro_csv(m["rate"], out / "rate.csv")
    write_macro_csv(m["cpi"], out / "cpi.csv")
    prices, index = m["universes"]["fixture"]
    write_prices_csv(prices, out / "prices_fixture.csv")
    write_prices_csv(index, out / "index_fixture.csv")
    cfg = base_config("fixture", "2025-02-03", 150, {"month": "2025-01"})
    cfg["name"] = "fixture"
    (out / "config.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")
    return out / "config.json"


# seed whose draw leaves every baseline and grid portfolio LP feasible
STUDY_SEED = 9


def write_study(out_dir, seed: int = STUDY_SEED) -> Path:
    """Two regimes and two universes over the empirical study's calendar.

    The config carries both regimes (a downturn cutoff in February and a
    late-summer cutoff) and the sensitivity grid of the study: T in
    {120, 180}, alpha in {0.90, 0.99}, theta0 scaled by 0.5 and 2, and a
    second universe, each varied around the baseline.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    m = synthetic_market(seed, "2024-01-02", "2025-10-31", {"nasdaq": 12, "sp500": 16})
    write_macro_csv(m["rate"], out / "rate.csv")
    write_macro_csv(m["cpi"], out / "cpi.csv")
    for name, (prices, index) in m["universes"].items():
        write_prices_csv(prices, out / f"prices_{name}.csv")
        write_prices_csv(index, out / f"index_{name}.csv")
    cfg = base_config("nasdaq", "2025-02-01", 150, {"month": "2025-01"})
    cfg["name"] = "study"
    cfg["end"] = "2025-03-31"
    cfg["regimes"] = [
        {"name": "recession", "cutoff": "2025-02-01", "end": "2025-03-31", "theta0": {"month": "2025-01"}},
        {"name": "expansion", "cutoff": "2025-09-01", "end": "2025-10-30", "theta0": {"month": "2025-08"}},
    ]
    cfg["universes"] = {"nasdaq": "prices_nasdaq.csv", "sp500": "prices_sp500.csv"}
    cfg["indices"] = {"nasdaq": "index_nasdaq.csv", "sp500": "index_sp500.csv"}
    cfg["sensitivity"] = {
        "window": [120, 180],
        "alpha": [0.90, 0.99],
        "theta0_scale": [0.5, 2.0],
        "universe": ["nasdaq", "sp500"],
        "mode": "one_at_a_time",
    }
    path = out / "config.json"
    path.write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")
    return path
