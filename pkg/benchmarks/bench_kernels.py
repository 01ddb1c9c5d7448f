"""Compare the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--solve]

Each kernel is timed on identical inputs in both backends and the results
are checked for bit-identical agreement before any timing is reported.
With --solve the fixture's manager LP is also solved end to end under each
backend (in a subprocess, since the backend is chosen at import).
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from riskquad import _kernels_py as py

try:
    from riskquad import _kernels as cy
except ImportError:  # pragma: no cover
    sys.exit("compiled extension not built: pip install -e . --no-build-isolation")


def cases(rng):
    s = np.sort(rng.normal(size=20_000))
    m = 400
    xb, lb = rng.uniform(0, 1, m), np.zeros(m)
    ub = np.where(rng.random(m) < 0.3, 1.0, np.inf)
    delta = rng.normal(size=m)
    basis = rng.permutation(4 * m)[:m].astype(np.int64)
    d = rng.normal(size=4 * m)
    status = rng.integers(0, 4, size=4 * m).astype(np.int8)
    binv = rng.normal(size=(m, m))
    col = rng.normal(size=m)
    col[7] = 3.0
    return {
        "sorted_es (T=20000)": lambda k: k.sorted_es(s, 0.95),
        "sorted_var (T=20000)": lambda k: k.sorted_var(s, 0.95),
        "mean_pos_part (T=20000)": lambda k: k.mean_pos_part(s, 0.5),
        "ratio_test (m=400)": lambda k: k.ratio_test(xb, lb, ub, delta, basis, 1e-9, False),
        "ratio_test bland": lambda k: k.ratio_test(xb, lb, ub, delta, basis, 1e-9, True),
        "price (n=1600)": lambda k: k.price(d, status, 1e-9, False),
        "eta_update (400x400)": lambda k: _eta(k, binv, col),
    }


def _eta(k, binv, col):
    b = binv.copy()
    k.eta_update(b, col, 7)
    return b


def same(a, b):
    if isinstance(a, np.ndarray):
        return a.tobytes() == b.tobytes()
    return a == b or (isinstance(a, tuple) and all(same(x, y) for x, y in zip(a, b)))


SOLVE = r"""
import json, timeit
from riskquad import backtest as B, data as D, synthetic, kernels
from riskquad.lp import solve
doc = json.loads(synthetic.FIXTURE_CONFIG.read_text()); d = synthetic.FIXTURE_DIR
mk = B.Market({"fixture": D.load_prices(d / doc["data"]["prices"])},
              {k: D.load_macro(d / v, k) for k, v in doc["data"]["macro"].items()},
              {"fixture": D.load_prices(d / doc["data"]["index"])})
an = tuple(B.Analyst(a["name"], D.AnalystRule(a["rule"], a["source"]), a["weight"]) for a in doc["analysts"])
c = B.BacktestConfig(doc["cutoff"], doc["window"], doc["alpha"], doc["theta0"], an, universe="fixture")
model = B.prepare(c, mk).models[-1][1]
best = min(timeit.timeit(lambda: solve(model), number=1) for _ in range(REPEAT))
sol = solve(model)
print(kernels.BACKEND, best, repr(sol.objective), sol.iterations)
"""


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--solve", action="store_true", help="also time a full manager LP solve per backend")
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<26}{'cython us':>12}{'numpy us':>12}{'speedup':>10}")
    for name, fn in cases(rng).items():
        if not same(fn(cy), fn(py)):
            sys.exit(f"{name}: backends disagree")
        t_cy = min(timeit.repeat(lambda: fn(cy), number=args.number, repeat=args.repeat)) / args.number
        t_py = min(timeit.repeat(lambda: fn(py), number=args.number, repeat=args.repeat)) / args.number
        print(f"{name:<26}{t_cy * 1e6:>12.1f}{t_py * 1e6:>12.1f}{t_py / t_cy:>9.1f}x")

    if args.solve:
        print()
        code = SOLVE.replace("REPEAT", str(args.repeat))
        out = {}
        for pure in ("0", "1"):
            env = dict(os.environ, RISKQUAD_PURE=pure)
            r = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
            backend, secs, obj, iters = r.stdout.split()
            out[backend] = obj
            print(f"manager LP solve [{backend}]: {float(secs) * 1e3:.1f} ms, {iters} pivots, objective {obj}")
        print("objectives identical:", len(set(out.values())) == 1)


if __name__ == "__main__":
    main()
