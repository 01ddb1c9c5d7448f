"""Command-line front end.

Exit codes: 0 success, 1 verification mismatch, 2 usage, config or data
error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import re
import sys
from pathlib import Path

from . import backtest as B
from . import data as D
from . import report as R
from . import synthetic
from .config import ConfigError, load_config, load_market, parse_override
from .lp import export_mps
from .verify import load_catalog, run_verify

log = logging.getLogger("riskquad")

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE = 0, 1, 2


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", name).strip("_").lower() or "portfolio"


def _out_dir(args, cfg) -> Path:
    if args.out:
        return Path(args.out)
    return Path(cfg.doc.get("out", "riskquad_out"))


def _regime_dir(out: Path, regime: str) -> Path:
    return out / _slug(regime) if regime else out


def _setup(args):
    cfg = load_config(args.config, fetch=args.fetch)
    market = load_market(cfg, fetch=args.fetch)
    return cfg, market


# --- commands ------------------------------------------------------------


def cmd_optimize(args) -> int:
    cfg, market = _setup(args)
    out = _out_dir(args, cfg)
    summary = []
    for regime in cfg.regimes():
        bc = cfg.backtest_config(regime)
        prep = B.prepare(bc, market)
        d = _regime_dir(out, bc.regime)
        rows = []
        if prep.no_data:
            for name in B.portfolio_names(bc):
                rows.append({"portfolio": name, "status": "no_data", "objective": None, "weights": None, "message": prep.no_data})
        for name, model in prep.models:
            R.write_text(d / "lp" / f"{_slug(name)}.mps", export_mps(model))
            res = B._solve_portfolio(name, model, bc, None)
            rows.append(
                {
                    "portfolio": name,
                    "status": res.status,
                    "objective": res.objective,
                    "weights": None if res.weights is None else res.weights,
                    "message": res.message,
                }
            )
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["portfolio", "status", "objective", *prep.tickers])
        for r in rows:
            ws = [R.fmt(float(v)) for v in r["weights"]] if r["weights"] is not None else [""] * len(prep.tickers)
            w.writerow([r["portfolio"], r["status"], R.fmt(r["objective"]), *ws])
        R.write_text(d / "weights.csv", buf.getvalue())
        doc = {
            "regime": bc.regime,
            "universe": bc.universe,
            "theta0": R._num(prep.theta0),
            "train": {"start": prep.train.dates[0], "end": prep.train.dates[-1], "days": len(prep.train.dates)},
            "portfolios": [
                {
                    "name": r["portfolio"],
                    "status": r["status"],
                    "objective": R._num(r["objective"]),
                    "weights": None if r["weights"] is None else {t: R._num(float(v)) for t, v in zip(prep.tickers, r["weights"])},
                    **({"message": r["message"]} if r["message"] else {}),
                }
                for r in rows
            ],
        }
        R.write_text(d / "optimize.json", json.dumps(doc, indent=2) + "\n")
        for r in rows:
            obj = "" if r["objective"] is None else f" objective={R.fmt(r['objective'])}"
            summary.append(f"{bc.regime or '-'} {r['portfolio']}: {r['status']}{obj}")
    print("\n".join(summary))
    print(f"wrote results to {out}")
    return EXIT_OK


def cmd_backtest(args) -> int:
    cfg, market = _setup(args)
    out = _out_dir(args, cfg)
    reports = []
    for regime in cfg.regimes():
        bc = cfg.backtest_config(regime)
        rep = B.run_backtest(bc, market)
        reports.append(rep)
        if not args.no_chart:
            title = "Baseline Portfolio Daily Return" + (f" ({bc.regime})" if bc.regime else "")
            name = f"chart_{_slug(bc.regime)}.svg" if bc.regime else "chart.svg"
            R.write_text(out / name, R.daily_chart_svg(rep, title))
    R.write_text(out / "report.csv", R.reports_csv(reports))
    R.write_text(out / "report.json", R.reports_json(reports))
    for rep in reports:
        for p in rep.portfolios:
            tail = f" return={R.fmt(p.two_month_return)}" if p.status == "optimal" else ""
            print(f"{rep.params['regime'] or '-'} {p.name}: {p.status}{tail}")
        print(f"{rep.params['regime'] or '-'} {B.INDEX}: return={R.fmt(rep.index_return)}")
    print(f"wrote results to {out}")
    return EXIT_OK


def _overrides(args, cfg):
    overrides, mode = cfg.sensitivity()
    for text in args.override or []:
        k, vals = parse_override(text)
        overrides[k] = vals
    if args.mode:
        mode = args.mode
    return overrides, mode


def cmd_sensitivity(args) -> int:
    cfg, market = _setup(args)
    overrides, mode = _overrides(args, cfg)
    universes = set(market.universes)
    for u in overrides.get("universe", []):
        if u not in universes:
            raise ConfigError(f"unknown universe {u!r} in overrides")
    out = _out_dir(args, cfg)
    by_regime, allreps = {}, []
    base_params = None
    for regime in cfg.regimes():
        bc = cfg.backtest_config(regime)
        try:
            reps = B.sensitivity_grid(bc, market, overrides, mode, workers=args.workers)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        by_regime[bc.regime or "run"] = reps
        allreps.extend(reps)
        base_params = bc.params()
    R.write_text(out / "sensitivity.csv", R.reports_csv(allreps))
    R.write_text(out / "sensitivity.json", R.reports_json(allreps))
    tables = R.sensitivity_tables(by_regime, base_params)
    for key, text in tables.items():
        R.write_text(out / "tables" / f"{key}.csv", text)
        R.write_text(out / "tables" / f"{key}.md", R.table_markdown(text))
    errors = [r for r in allreps if r.error]
    print(f"{len(allreps)} cells ({len(errors)} with errors), {len(by_regime)} regime(s)")
    for r in errors:
        print(f"  error in {r.params}: {r.error}")
    print(f"wrote results to {out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    catalog = load_catalog(args.catalog) if args.catalog else None
    res = run_verify(seed=args.seed, trials=args.trials, identities=args.identities, catalog=catalog)
    print("\n".join(res.lines))
    if res.ok:
        print("verification passed")
        return EXIT_OK
    print(f"verification FAILED: {len(res.mismatches)} mismatch(es)")
    return EXIT_MISMATCH


def cmd_export_lp(args) -> int:
    cfg, market = _setup(args)
    out = _out_dir(args, cfg)
    written = []
    for regime in cfg.regimes():
        bc = cfg.backtest_config(regime)
        prep = B.prepare(bc, market)
        if prep.no_data:
            raise D.DataError(prep.no_data)
        for name, model in prep.models:
            if args.portfolio and name != args.portfolio:
                continue
            written.append(R.write_text(_regime_dir(out, bc.regime) / "lp" / f"{_slug(name)}.mps", export_mps(model)))
    if not written:
        raise ConfigError(f"no portfolio named {args.portfolio!r}")
    for p in written:
        print(p)
    return EXIT_OK


def cmd_synth(args) -> int:
    out = Path(args.out or "synthetic")
    if args.kind == "fixture":
        path = synthetic.write_fixture(out, args.seed if args.seed is not None else 1)
    else:
        path = synthetic.write_study(out, args.seed if args.seed is not None else synthetic.STUDY_SEED)
    print(path)
    return EXIT_OK


# --- parser --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="riskquad", description="Weighted ES portfolios, risk quadrangle checks and backtests.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", help="output directory (default: the config's 'out' or ./riskquad_out)")
        p.add_argument("--fetch", action="store_true", help="download prices from the config's fetch endpoint")
        p.add_argument("--seed", type=int, default=None, help="recorded for reproducibility; the pipeline itself draws no random numbers")
        return p

    p = with_config(sub.add_parser("optimize", help="solve every portfolio LP and write weights and MPS files"))
    p.set_defaults(func=cmd_optimize)

    p = with_config(sub.add_parser("backtest", help="train/test backtest with CSV, JSON and an SVG chart"))
    p.add_argument("--no-chart", action="store_true", help="skip the SVG chart")
    p.set_defaults(func=cmd_backtest)

    p = with_config(sub.add_parser("sensitivity", help="backtest grid over T, alpha, theta0 scale and universe"))
    p.add_argument("--override", action="append", metavar="KEY=v1,v2", help="grid values, e.g. window=120,150,180 (repeatable)")
    p.add_argument("--mode", choices=("product", "one_at_a_time"), help="Cartesian product or one change at a time")
    p.add_argument("--workers", type=int, default=1, help="grid cells solved in parallel")
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("verify", help="axiom catalog, weight recovery and quadrangle identity suites")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=1000, help="random trials per axiom")
    p.add_argument("--identities", type=int, default=200, help="random quadrangle instances")
    p.add_argument("--catalog", help="JSON file replacing the built-in expected axiom outcomes")
    p.set_defaults(func=cmd_verify)

    p = with_config(sub.add_parser("export-lp", help="write the MPS file of each portfolio LP"))
    p.add_argument("--portfolio", help="only this portfolio")
    p.set_defaults(func=cmd_export_lp)

    p = sub.add_parser("synth", help="write seeded synthetic market data and a config")
    p.add_argument("--kind", choices=("fixture", "study"), default="fixture")
    p.add_argument("--out", help="output directory (default ./synthetic)")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_synth)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "workers", 1) < 1:
        print("riskquad: error: --workers must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    if getattr(args, "trials", 1) < 1 or getattr(args, "identities", 1) < 1:
        print("riskquad: error: --trials and --identities must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"riskquad: config error: {e}", file=sys.stderr)
    except D.DataError as e:
        print(f"riskquad: data error: {e}", file=sys.stderr)
    except (ValueError, OSError) as e:
        print(f"riskquad: error: {e}", file=sys.stderr)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
