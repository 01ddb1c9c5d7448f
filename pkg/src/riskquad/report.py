"""Report serialisation: CSV, JSON, study-style sensitivity tables and an SVG chart.

Numbers are written with ``%.12g`` so that output bytes do not depend on
the last bits of floating-point round-off.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

from .backtest import INDEX, BacktestReport

PARAM_COLUMNS = ("regime", "universe", "window", "alpha", "theta0_scale", "theta0")
CSV_COLUMNS = ("portfolio", "two_month_return", "sharpe", "sortino", "status") + PARAM_COLUMNS


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool,)):
        return str(v).lower()
    if isinstance(v, int):
        return str(v)
    if not math.isfinite(v):
        return repr(float(v))
    return "%.12g" % v


def _num(v):
    """JSON value with the same 12 significant digits as the CSV."""
    if v is None:
        return None
    return float("%.12g" % v)


def _ratio(v, status):
    if status != "optimal":
        return ""
    return "undefined" if v is None else fmt(v)


def report_rows(reports) -> list[dict]:
    rows = []
    for rep in reports:
        params = {k: rep.params.get(k) for k in PARAM_COLUMNS}
        if rep.error:
            rows.append({"portfolio": "", "status": "error: " + rep.error, **params})
            continue
        for p in rep.portfolios:
            rows.append(
                {
                    "portfolio": p.name,
                    "two_month_return": p.two_month_return,
                    "sharpe": _ratio(p.sharpe, p.status),
                    "sortino": _ratio(p.sortino, p.status),
                    "status": p.status,
                    **params,
                }
            )
        rows.append({"portfolio": INDEX, "two_month_return": rep.index_return, "status": "reference", **params})
    return rows


def reports_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in report_rows(reports):
        w.writerow([fmt(row.get(c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def report_json(rep: BacktestReport) -> dict:
    out = {
        "params": {k: (_num(v) if isinstance(v, float) else v) for k, v in rep.params.items()},
        "error": rep.error or None,
        "train": {"start": rep.train_dates[0], "end": rep.train_dates[-1], "days": len(rep.train_dates)} if rep.train_dates else None,
        "test": {"start": rep.test_dates[0], "end": rep.test_dates[-1], "days": len(rep.test_dates)} if rep.test_dates else None,
        "index_return": _num(rep.index_return),
        "portfolios": [],
    }
    for p in rep.portfolios:
        entry = {"name": p.name, "status": p.status}
        if p.message:
            entry["message"] = p.message
        if p.status == "optimal":
            entry.update(
                {
                    "objective": _num(p.objective),
                    "weights": {t: _num(float(w)) for t, w in zip(rep.tickers, p.weights)},
                    "two_month_return": _num(p.two_month_return),
                    "sharpe": _num(p.sharpe),
                    "sortino": _num(p.sortino),
                    "daily": [_num(float(v)) for v in p.daily],
                }
            )
        out["portfolios"].append(entry)
    return out


def reports_json(reports) -> str:
    return json.dumps({"cells": [report_json(r) for r in reports]}, indent=2, sort_keys=False) + "\n"


# --- sensitivity tables -------------------------------------------------

TABLES = (
    ("baseline", "Baseline results", None),
    ("window", "Change time window", "window"),
    ("alpha", "Change ES level", "alpha"),
    ("theta0", "Change target return", "theta0_scale"),
    ("universe", "Change underlying assets", "universe"),
)
TABLE_KEYS = ("window", "alpha", "theta0_scale", "universe")


def _diff(params, base):
    return [k for k in TABLE_KEYS if params.get(k) != base.get(k)]


def _panel_label(params, base, keys):
    if not keys:
        return "Benchmark case"
    names = {"window": "T", "alpha": "alpha", "theta0_scale": "theta0 x", "universe": "universe"}
    return ", ".join(f"{names[k]}={fmt(params[k])}" for k in keys)


def sensitivity_tables(reports_by_regime: dict, base_params: dict) -> dict:
    """Tables with one row per portfolio and one column group per regime.

    ``reports_by_regime`` maps a regime name to its grid reports (same cell
    order for every regime). Returns {table key: csv text}.
    """
    regimes = list(reports_by_regime)
    first = reports_by_regime[regimes[0]]
    head = ["panel", "portfolio"]
    for g in regimes:
        head += [f"{g}_two_month_return", f"{g}_sharpe", f"{g}_sortino"]
    # portfolio names from any cell that ran, so failed cells still get rows
    ran = [r for reps in reports_by_regime.values() for r in reps if r.portfolios]
    names = [p.name for p in ran[0].portfolios] if ran else []
    tables = {}
    for key, _title, param in TABLES:
        cells = []
        for c, rep in enumerate(first):
            d = _diff(rep.params, base_params)
            if param is None and not d:
                cells.append(c)
            elif param is not None and d == [param]:
                cells.append(c)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(head)
        for c in cells:
            panel = _panel_label(first[c].params, base_params, _diff(first[c].params, base_params))
            for name in names:
                row = [panel, name]
                for g in regimes:
                    r = reports_by_regime[g][c]
                    p = next((q for q in r.portfolios if q.name == name), None)
                    if p is None:
                        row += ["error", "", ""]
                    elif p.status != "optimal":
                        row += [p.status, "", ""]
                    else:
                        row += [fmt(p.two_month_return), _ratio(p.sharpe, p.status), _ratio(p.sortino, p.status)]
                w.writerow(row)
            row = [panel, "Index two-month return"]
            for g in regimes:
                row += [fmt(reports_by_regime[g][c].index_return), "", ""]
            w.writerow(row)
        tables[key] = buf.getvalue()
    return tables


def table_markdown(csv_text: str) -> str:
    rows = list(csv.reader(io.StringIO(csv_text)))
    if not rows:
        return ""
    widths = [max(len(r[i]) if i < len(r) else 0 for r in rows) for i in range(len(rows[0]))]
    out = []
    for n, r in enumerate(rows):
        out.append("| " + " | ".join(c.ljust(wd) for c, wd in zip(r, widths)) + " |")
        if n == 0:
            out.append("|" + "|".join("-" * (wd + 2) for wd in widths) + "|")
    return "\n".join(out) + "\n"


# --- chart ---------------------------------------------------------------

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#111111", "#9467bd", "#8c564b")


def daily_chart_svg(rep: BacktestReport, title: str = "Portfolio daily return", width: int = 900, height: int = 420) -> str:
    """Line chart of the test-period daily returns, one series per portfolio."""
    series = [(p.name, p.daily) for p in rep.portfolios if p.status == "optimal"]
    if rep.index_daily is not None:
        series.append((INDEX, rep.index_daily))
    left, right, top, bottom = 70, 150, 40, 50
    pw, ph = width - left - right, height - top - bottom
    vals = [float(v) for _, s in series for v in s] or [0.0]
    lo, hi = min(vals + [0.0]), max(vals + [0.0])
    if hi == lo:
        hi, lo = hi + 0.01, lo - 0.01
    n = max((len(s) for _, s in series), default=1)

    def X(k):
        return left + (pw * k / (n - 1) if n > 1 else pw / 2)

    def Y(v):
        return top + ph * (hi - v) / (hi - lo)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left}" y="24" font-family="sans-serif" font-size="16">{title}</text>',
        f'<line x1="{left}" y1="{Y(0):.2f}" x2="{left + pw}" y2="{Y(0):.2f}" stroke="#999" stroke-dasharray="4 3"/>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>',
    ]
    for t in range(5):
        v = lo + (hi - lo) * t / 4
        out.append(f'<text x="{left - 6}" y="{Y(v) + 4:.2f}" font-family="sans-serif" font-size="11" text-anchor="end">{v * 100:.1f}%</text>')
    dates = rep.test_dates
    for k in sorted({0, n // 2, n - 1}):
        if k < len(dates):
            out.append(f'<text x="{X(k):.2f}" y="{top + ph + 18}" font-family="sans-serif" font-size="11" text-anchor="middle">{dates[k]}</text>')
    for c, (name, s) in enumerate(series):
        colour = PALETTE[c % len(PALETTE)]
        pts = " ".join(f"{X(k):.2f},{Y(float(v)):.2f}" for k, v in enumerate(s))
        dash = ' stroke-dasharray="6 3"' if name == INDEX else ""
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5"{dash} points="{pts}"/>')
        ly = top + 14 + 18 * c
        out.append(f'<line x1="{left + pw + 12}" y1="{ly}" x2="{left + pw + 32}" y2="{ly}" stroke="{colour}" stroke-width="2"{dash}/>')
        out.append(f'<text x="{left + pw + 38}" y="{ly + 4}" font-family="sans-serif" font-size="12">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(text)
    return path
