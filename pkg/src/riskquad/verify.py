"""Built-in verification suite driven by ``riskquad verify``.

The expected axiom outcomes of each reference functional are kept in a
catalog; a run passes only when every observed pass/fail matches it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import wgrm
from .quadrangle import verify_identities

ZOO_N = 4
NONUNIFORM = (0.1, 0.2, 0.3, 0.4)

# expected pass (True) / fail (False) per axiom
CATALOG = {
    "linear_uniform": {"B1": True, "B2": True, "B3": True, "B3'": True, "B4": True, "B6": True, "B6'": True},
    "linear": {"B1": True, "B2": True, "B3": True, "B3'": True, "B4": False, "B6": True, "B6'": True},
    "max": {"B1": True, "B2": True, "B3": True, "B3'": True, "B4": True, "B6": True, "B6'": False},
    "first_coordinate": {"B1": True, "B2": True, "B3": True, "B3'": True, "B4": False, "B6": True, "B6'": True},
    "sup_weight_set": {"B1": True, "B2": True, "B3": True, "B3'": True, "B4": True, "B6": False, "B6'": False},
}


def functional_zoo(n: int = ZOO_N) -> dict:
    uniform = np.full(n, 1.0 / n)
    ramp = np.arange(1, n + 1, dtype=np.float64)
    # two non-decreasing members, neither dominating the other on sorted vectors
    # (a set holding the last basis vector would reduce to the max)
    flat_top = np.concatenate(([0.0], np.full(n - 1, 1.0 / (n - 1))))
    W = wgrm.WeightSet((ramp / ramp.sum(), flat_top), monotone_required=True)
    mu = np.array(NONUNIFORM if n == len(NONUNIFORM) else ramp / ramp.sum())
    return {
        "linear_uniform": wgrm.linear_functional(uniform),
        "linear": wgrm.linear_functional(mu),
        "max": wgrm.max_functional,
        "first_coordinate": wgrm.first_coordinate,
        "sup_weight_set": wgrm.sup_functional(W),
    }


def load_catalog(path) -> dict:
    with open(path) as f:
        cat = json.load(f)
    if not isinstance(cat, dict) or not all(isinstance(v, dict) for v in cat.values()):
        raise ValueError("catalog must map functional names to {axiom: bool}")
    for name, row in cat.items():
        for ax, v in row.items():
            if ax not in wgrm.AXIOMS or not isinstance(v, bool):
                raise ValueError(f"catalog entry {name}/{ax} is not a known axiom with a boolean outcome")
    return cat


@dataclass
class VerifyResult:
    lines: list = field(default_factory=list)
    mismatches: list = field(default_factory=list)

    def add(self, ok: bool, text: str):
        self.lines.append(("ok   " if ok else "FAIL ") + text)
        if not ok:
            self.mismatches.append(text)

    @property
    def ok(self) -> bool:
        return not self.mismatches


def a3_counterexample() -> dict:
    """Nested scenario sets where the smaller one carries more risk.

    Q = {P1} with risk 5; R = {P1, P2} adds a scenario with risk 1 and
    equal weights, so the weighted risk drops from 5 to 3.
    """
    risk_Q, mu_Q = [5.0], [1.0]
    risk_R, mu_R = [5.0, 1.0], [0.5, 0.5]
    return {
        "Q": {"risks": risk_Q, "weights": mu_Q, "aggregate": wgrm.aggregate(risk_Q, mu_Q)},
        "R": {"risks": risk_R, "weights": mu_R, "aggregate": wgrm.aggregate(risk_R, mu_R)},
        "a3_holds": wgrm.a3_check(risk_Q, mu_Q, risk_R, mu_R),
    }


def run_verify(seed: int = 0, trials: int = 1000, identities: int = 200, catalog: dict | None = None) -> VerifyResult:
    if trials < 1 or identities < 1:
        raise ValueError("trials and identities must be >= 1")
    catalog = CATALOG if catalog is None else catalog
    out = VerifyResult()
    zoo = functional_zoo()

    for name in sorted(set(zoo) | set(catalog)):
        if name not in zoo:
            out.add(False, f"axioms {name}: not a built-in functional")
            continue
        rep = wgrm.check_axioms(zoo[name], ZOO_N, trials=trials, seed=seed)
        expected = catalog.get(name, {})
        for ax in wgrm.AXIOMS:
            got = rep.passed(ax)
            want = expected.get(ax)
            word = "pass" if got else "fail"
            if want is None:
                out.add(False, f"axioms {name} {ax}: observed {word}, no catalog entry")
            else:
                out.add(got == want, f"axioms {name} {ax}: observed {word}, expected {'pass' if want else 'fail'}")

    rng = np.random.default_rng([seed, 1])
    worst = 0.0
    for n in range(2, 9):
        for _ in range(100):
            mu = rng.dirichlet(np.ones(n))
            got = wgrm.recover_weights(wgrm.linear_functional(mu), n)
            worst = max(worst, float(np.max(np.abs(got - mu))))
    out.add(worst <= 1e-12, f"recover_weights: 700 round trips, max error {worst:.3g} (limit 1e-12)")

    rng = np.random.default_rng([seed, 2])
    bad, worst = 0, {}
    for _ in range(identities):
        n = int(rng.integers(1, 4))
        samples = [rng.normal(size=int(rng.integers(1, 30))) for _ in range(n)]
        mu = rng.dirichlet(np.ones(n))
        alpha = float(rng.uniform(0.05, 0.99))
        rep = verify_identities(samples, alpha, mu)
        bad += not rep.ok
        for k, v in rep.residuals.items():
            worst[k] = max(worst.get(k, 0.0), v)
    out.add(bad == 0, f"quadrangle identities: {identities} instances, {bad} failures")
    for k in sorted(worst):
        out.lines.append(f"       max {k}: {worst[k]:.3g}")

    ce = a3_counterexample()
    shown = (
        f"A3 counterexample: Q={ce['Q']['risks']} mu_Q={ce['Q']['weights']} -> {ce['Q']['aggregate']:g}; "
        f"R={ce['R']['risks']} mu_R={ce['R']['weights']} -> {ce['R']['aggregate']:g}; "
        f"aggregate(Q) > aggregate(R), A3 {'holds' if ce['a3_holds'] else 'violated'}"
    )
    out.add(not ce["a3_holds"] and ce["Q"]["aggregate"] > ce["R"]["aggregate"], shown)
    return out
