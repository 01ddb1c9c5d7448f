import math
import warnings

import numpy as np
import pytest
from scipy.optimize import linprog

from riskquad import core
from riskquad.lp import (
    LpModel,
    LpRow,
    PortfolioProblem,
    build_analyst_lp,
    build_generic_regret_lp,
    build_manager_lp,
    es_of_portfolio,
    es_pieces,
    export_mps,
    parse_mps,
    portfolio_weights,
    solve,
)
from oracles import brute_weighted_es_grid

INF = math.inf


def highs(model: LpModel):
    """Solve with scipy's HiGHS; returns (status, objective)."""
    A = model.matrix()
    ub_rows = [i for i, r in enumerate(model.rows) if r.sense != "E"]
    eq_rows = [i for i, r in enumerate(model.rows) if r.sense == "E"]
    sgn = np.array([1.0 if model.rows[i].sense == "L" else -1.0 for i in ub_rows])
    kw = {}
    if ub_rows:
        kw["A_ub"] = A[ub_rows] * sgn[:, None]
        kw["b_ub"] = np.array([model.rows[i].rhs for i in ub_rows]) * sgn
    if eq_rows:
        kw["A_eq"] = A[eq_rows]
        kw["b_eq"] = [model.rows[i].rhs for i in eq_rows]
    bounds = [(None if lo == -INF else lo, None if hi == INF else hi) for lo, hi in zip(model.lower, model.upper)]
    res = linprog(model.objective, bounds=bounds, method="highs", **kw)
    status = {0: "optimal", 2: "infeasible", 3: "unbounded"}.get(res.status, "other")
    return status, (res.fun + model.objective_offset if res.status == 0 else None)


def random_problem(rng, m=None, n=None, tmax=30, mode="equality"):
    m = m or int(rng.integers(1, 5))
    n = n or int(rng.integers(1, 4))
    returns = [rng.normal(0.0005, 0.02, size=(int(rng.integers(1, tmax + 1)), m)) for _ in range(n)]
    theta = [r.mean(axis=0) for r in returns]
    mu = rng.dirichlet(np.ones(n))
    th = sum(mi * t for mi, t in zip(mu, theta))
    # target strictly inside the attainable range
    w = rng.dirichlet(np.ones(m))
    theta0 = float(th @ w)
    alpha = float(rng.choice([0.5, 0.8, 0.9, 0.95]))
    return PortfolioProblem(returns, theta, theta0, alpha, mu, mode)


def random_lp(rng):
    nr, nv = int(rng.integers(1, 7)), int(rng.integers(1, 7))
    A = np.round(rng.normal(size=(nr, nv)), 1)
    A[rng.random(A.shape) < 0.3] = 0.0
    rows = []
    for i in range(nr):
        idx = tuple(int(j) for j in np.flatnonzero(A[i]))
        rows.append(LpRow(f"r{i}", idx, tuple(float(A[i, j]) for j in idx), str(rng.choice(["L", "G", "E"])), float(np.round(rng.normal(), 1))))
    lo, hi = [], []
    for _ in range(nv):
        kind = rng.integers(4)
        if kind == 0:
            lo.append(0.0); hi.append(INF)
        elif kind == 1:
            lo.append(-INF); hi.append(INF)
        elif kind == 2:
            a = float(np.round(rng.normal(), 1))
            lo.append(a); hi.append(a + float(rng.integers(0, 3)))
        else:
            lo.append(-INF); hi.append(float(np.round(rng.normal(), 1)))
    obj = tuple(float(v) for v in np.round(rng.normal(size=nv), 1))
    return LpModel("R", tuple(f"v{j}" for j in range(nv)), obj, tuple(rows), tuple(lo), tuple(hi))


class TestSolver:
    def test_trivial(self):
        m = LpModel("T", ("x",), (1.0,), (LpRow("r", (0,), (1.0,), "G", 3.0),), (-INF,), (INF,))
        sol = solve(m)
        assert sol.status == "optimal" and sol.objective == pytest.approx(3.0, abs=1e-12)

    def test_contradiction(self):
        rows = (LpRow("a", (0,), (1.0,), "G", 1.0), LpRow("b", (0,), (1.0,), "L", 0.0))
        assert solve(LpModel("T", ("x",), (1.0,), rows, (-INF,), (INF,))).status == "infeasible"

    def test_unbounded(self):
        m = LpModel("T", ("x", "y"), (-1.0, 0.0), (LpRow("a", (0, 1), (1.0, -1.0), "L", 1.0),), (0.0, 0.0), (INF, INF))
        assert solve(m).status == "unbounded"

    def test_no_rows(self):
        m = LpModel("T", ("x", "y"), (1.0, -2.0), (), (-1.0, 0.0), (4.0, 3.0))
        sol = solve(m)
        assert sol.status == "optimal" and sol.objective == -7.0

    def test_bad_tol(self):
        with pytest.raises(ValueError):
            solve(LpModel("T", (), (), (), (), ()), tol=0)

    def test_against_highs(self):
        rng = np.random.default_rng(0)
        seen = set()
        for _ in range(400):
            model = random_lp(rng)
            ref_status, ref_obj = highs(model)
            if ref_status == "other":
                continue
            sol = solve(model)
            seen.add(sol.status)
            assert sol.status == ref_status, export_mps(model)
            if ref_status == "optimal":
                assert sol.objective == pytest.approx(ref_obj, abs=1e-7)
                assert sol.residual <= 1e-8 * 10
                assert sol.duality_gap <= 1e-8
        assert seen == {"optimal", "infeasible", "unbounded"}

    def test_deterministic_bytes(self):
        model = build_manager_lp(random_problem(np.random.default_rng(1), 3, 2))
        a, b = solve(model), solve(parse_mps(export_mps(model)))
        assert a.x.tobytes() == b.x.tobytes() and a.objective == b.objective

    def test_degenerate_cycling_guard(self):
        # classic cycling example under Dantzig pricing with largest-coefficient ties
        rows = (
            LpRow("a", (0, 1, 2, 3), (0.5, -5.5, -2.5, 9.0), "L", 0.0),
            LpRow("b", (0, 1, 2, 3), (0.5, -1.5, -0.5, 1.0), "L", 0.0),
            LpRow("c", (0,), (1.0,), "L", 1.0),
        )
        m = LpModel("BEALE", ("x1", "x2", "x3", "x4"), (-10.0, 57.0, 9.0, 24.0), rows, (0.0,) * 4, (INF,) * 4)
        sol = solve(m)
        assert sol.status == "optimal" and sol.objective == pytest.approx(-1.0, abs=1e-9)


class TestManager:
    def test_single_asset_example(self):
        r = np.array([[0.01], [-0.02], [0.03]])
        p = PortfolioProblem([r], [r.mean(axis=0)], float(r.mean()), 2 / 3, [1.0])
        sol = solve(build_manager_lp(p))
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(0.02, abs=1e-12)
        assert sol.objective == pytest.approx(core.es_alpha(-r.ravel(), 2 / 3), abs=1e-12)

    def test_variable_order(self):
        p = random_problem(np.random.default_rng(2), 2, 2)
        model = build_manager_lp(p)
        T = [r.shape[0] for r in p.returns]
        expect = ["x1", "x2", "c", "b1", "b2"] + [f"t{i + 1}_{k + 1}" for i in range(2) for k in range(T[i])]
        assert list(model.variables) == expect
        assert [r.name for r in model.rows][-3:] == ["bsum", "target", "budget"]
        assert model.lower[:2] == (0.0, 0.0) and model.upper[:2] == (1.0, 1.0)

    def test_manager_equals_analyst_for_one_scenario(self):
        p = random_problem(np.random.default_rng(3), 3, 1, mode="at_least")
        mgr, ana = build_manager_lp(p), build_analyst_lp(p, 0)
        keep = [j for j, v in enumerate(mgr.variables) if v != "b1"]
        assert [mgr.variables[j] for j in keep] == list(ana.variables)
        assert [mgr.objective[j] for j in keep] == list(ana.objective)
        A, B = mgr.matrix(), ana.matrix()
        rows = [i for i, r in enumerate(mgr.rows) if r.name != "bsum"]
        assert np.array_equal(A[np.ix_(rows, keep)], B)
        assert [mgr.rows[i].sense for i in rows] == [r.sense for r in ana.rows]
        assert solve(mgr).objective == pytest.approx(solve(ana).objective, abs=1e-10)

    def test_infeasible_target(self):
        p = random_problem(np.random.default_rng(4), 3, 2)
        p.theta0 = max(float(t.max()) for t in p.theta) + 0.01
        assert solve(build_manager_lp(p)).status == "infeasible"
        assert solve(build_analyst_lp(p, 0)).status == "infeasible"

    def test_rockafellar_uryasev(self):
        rng = np.random.default_rng(5)
        for _ in range(40):
            p = random_problem(rng, n=1, tmax=60)
            sol = solve(build_manager_lp(p))
            assert sol.status == "optimal"
            x = portfolio_weights(build_manager_lp(p), sol.x)
            assert sol.objective == pytest.approx(es_of_portfolio(x, p.returns[0], p.alpha), abs=1e-7)

    def test_decoupling_brute_force(self):
        rng = np.random.default_rng(6)
        for _ in range(15):
            p = random_problem(rng, m=int(rng.integers(1, 5)), n=int(rng.integers(1, 4)), tmax=8)
            model = build_manager_lp(p)
            sol = solve(model)
            assert sol.status == "optimal"
            x = portfolio_weights(model, sol.x)
            losses = [list(-(r @ x)) for r in p.returns]
            decoupled = sum(mi * core.es_alpha(L, p.alpha) for mi, L in zip(p.mu, losses))
            assert sol.objective == pytest.approx(decoupled, abs=1e-6)
            assert sol.objective == pytest.approx(brute_weighted_es_grid(losses, list(p.mu), p.alpha), abs=1e-6)

    def test_matches_highs(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            p = random_problem(rng)
            model = build_manager_lp(p)
            assert solve(model).objective == pytest.approx(highs(model)[1], abs=1e-7)

    def test_relaxation_monotone(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            p = random_problem(rng)
            eq = solve(build_manager_lp(p)).objective
            p.constraint_mode = "at_least"
            ge = solve(build_manager_lp(p)).objective
            p.theta0 -= 0.001
            lower = solve(build_manager_lp(p)).objective
            assert ge <= eq + 1e-10 and lower <= ge + 1e-10

    def test_scaling(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            p = random_problem(rng)
            model = build_manager_lp(p)
            base = solve(model)
            a = float(rng.uniform(0.5, 3.0))
            q = PortfolioProblem([a * r for r in p.returns], [a * t for t in p.theta], a * p.theta0, p.alpha, p.mu)
            scaled = solve(build_manager_lp(q))
            assert scaled.objective == pytest.approx(a * base.objective, abs=1e-9)
            x = portfolio_weights(model, base.x)
            losses = [-(a * r) @ x for r in p.returns]
            assert sum(mi * core.es_alpha(L, p.alpha) for mi, L in zip(p.mu, losses)) == pytest.approx(scaled.objective, abs=1e-8)

    def test_analyst_monotone_in_alpha(self):
        p = random_problem(np.random.default_rng(10), 3, 2, tmax=40)
        vals = []
        for a in (0.5, 0.7, 0.9, 0.95):
            p.alpha = a
            vals.append(solve(build_analyst_lp(p, 1)).objective)
        assert all(u <= v + 1e-10 for u, v in zip(vals, vals[1:]))

    def test_analyst_single_asset(self):
        r = np.array([[0.01], [-0.02], [0.03], [0.0]])
        p = PortfolioProblem([r, r[:2]], [r.mean(0), r[:2].mean(0)], -1.0, 0.5, [0.5, 0.5], "at_least")
        assert solve(build_analyst_lp(p, 0)).objective == pytest.approx(core.es_alpha(-r.ravel(), 0.5), abs=1e-12)
        with pytest.raises(IndexError):
            build_analyst_lp(p, 2)

    def test_invalid_problem(self):
        r = np.zeros((3, 2))
        with pytest.raises(ValueError):
            PortfolioProblem([r], [[0.0, 0.0]], 0.0, 1.0, [1.0])
        with pytest.raises(ValueError):
            PortfolioProblem([r], [[0.0]], 0.0, 0.5, [1.0])
        with pytest.raises(ValueError):
            PortfolioProblem([r, r], [[0, 0], [0, 0]], 0.0, 0.5, [0.6, 0.6])
        with pytest.raises(ValueError):
            PortfolioProblem([r], [[0, 0]], 0.0, 0.5, [1.0], constraint_mode="sometimes")

    def test_corner_warning(self):
        r = np.array([[0.05, -0.01], [0.04, 0.02]])
        p = PortfolioProblem([r], [r.mean(0)], float(r.mean(0)[0]), 0.5, [1.0])
        model = build_manager_lp(p)
        sol = solve(model)
        with pytest.warns(RuntimeWarning):
            portfolio_weights(model, sol.x)


class TestGeneric:
    def test_es_pieces_reproduce_manager(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            p = random_problem(rng, m=2, n=int(rng.integers(1, 4)), tmax=10)
            a = solve(build_manager_lp(p)).objective
            b = solve(build_generic_regret_lp(es_pieces(p), p)).objective
            assert b == pytest.approx(a, abs=1e-7)

    def test_two_asset_ten_day_example(self):
        rng = np.random.default_rng(12)
        r = rng.normal(0.001, 0.02, size=(10, 2))
        p = PortfolioProblem([r], [r.mean(0)], float(r.mean()), 0.8, [1.0])
        assert solve(build_generic_regret_lp(es_pieces(p), p)).objective == pytest.approx(solve(build_manager_lp(p)).objective, abs=1e-7)

    def test_vector_pieces(self):
        # all tail subsets of a 4-day sample at alpha = 0.5: sup over subset means
        rng = np.random.default_rng(13)
        r = rng.normal(0, 0.02, size=(4, 2))
        p = PortfolioProblem([r], [r.mean(0)], float(r.mean()), 0.5, [1.0])
        import itertools

        pieces = []
        for k in range(5):
            for sub in itertools.combinations(range(4), k):
                w = np.zeros(4)
                w[list(sub)] = 1.0 / (0.5 * 4)
                pieces.append((w, 0.0))
        assert solve(build_generic_regret_lp([pieces], p)).objective == pytest.approx(solve(build_manager_lp(p)).objective, abs=1e-9)

    def test_zero_pieces_unbounded(self):
        p = random_problem(np.random.default_rng(14), 2, 2)
        assert solve(build_generic_regret_lp([[(0.0, 0.0)], [(0.0, 0.0)]], p)).status == "unbounded"

    def test_slope_other_than_one_unbounded(self):
        p = random_problem(np.random.default_rng(15), 2, 1)
        assert solve(build_generic_regret_lp([[(2.0, 0.0)]], p)).status == "unbounded"

    def test_identity_piece_is_bounded(self):
        # phi(y) = y: c cancels, the value is the best weighted expected loss
        p = random_problem(np.random.default_rng(16), 3, 2, mode="at_least")
        sol = solve(build_generic_regret_lp([[(1.0, 0.0)], [(1.0, 0.0)]], p))
        assert sol.status == "optimal"
        model = build_generic_regret_lp([[(1.0, 0.0)], [(1.0, 0.0)]], p)
        with warnings.catch_warnings():
            # a linear objective sits at a vertex of the simplex
            warnings.simplefilter("ignore", RuntimeWarning)
            x = portfolio_weights(model, sol.x)
        expected = sum(mi * float(np.mean(-(r @ x))) for mi, r in zip(p.mu, p.returns))
        assert sol.objective == pytest.approx(expected, abs=1e-10)

    @pytest.mark.parametrize("bad", [[(lambda y: y, 0.0)], [(1.0,)], [(1.0, math.nan)], [], [(np.ones(3), 0.0), (1.0, 0.0)], [("a", 0.0)]])
    def test_non_affine_rejected(self, bad):
        r = np.zeros((3, 1))
        p = PortfolioProblem([r], [[0.0]], 0.0, 0.5, [1.0])
        with pytest.raises(ValueError):
            build_generic_regret_lp([bad], p)


class TestPortfolioEs:
    def test_vertex(self):
        r = np.random.default_rng(17).normal(size=(20, 3))
        assert es_of_portfolio([0, 1, 0], r, 0.9) == core.es_alpha(-r[:, 1], 0.9)

    def test_identical_assets(self):
        col = np.random.default_rng(18).normal(size=(15, 1))
        r = np.hstack([col, col, col])
        assert es_of_portfolio([1 / 3] * 3, r, 0.8) == pytest.approx(core.es_alpha(-col.ravel(), 0.8), abs=1e-15)

    def test_not_simplex(self):
        with pytest.raises(ValueError):
            es_of_portfolio([0.5, 0.6], np.zeros((2, 2)), 0.5)


class TestMps:
    def test_empty_model(self):
        text = export_mps(LpModel("E", ("x",), (1.0,), (), (0.0,), (INF,)))
        for section in ("NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"):
            assert section in text
        assert parse_mps(text) == LpModel("E", ("x",), (1.0,), (), (0.0,), (INF,))

    def test_round_trip_manager(self):
        p = random_problem(np.random.default_rng(19), 2, 2)
        p = PortfolioProblem([r[:3] for r in p.returns], p.theta, p.theta0, p.alpha, p.mu)
        model = build_manager_lp(p)
        assert parse_mps(export_mps(model)) == model

    def test_round_trip_random(self):
        rng = np.random.default_rng(20)
        for _ in range(200):
            model = random_lp(rng)
            model = LpModel(model.name, model.variables, tuple(v * math.pi for v in model.objective), model.rows, model.lower, model.upper, float(rng.normal()))
            back = parse_mps(export_mps(model))
            assert back == model
            assert export_mps(back) == export_mps(model)

    def test_field_alignment(self):
        text = export_mps(build_manager_lp(random_problem(np.random.default_rng(21), 2, 1, tmax=5)))
        section = None
        for line in text.splitlines():
            if not line.startswith(" "):
                section = line.split()[0]
                continue
            if section == "COLUMNS":
                assert line[4:12].strip() and line[14:22].strip() and line[12:14] == "  "

    def test_external_solver_on_exported_file(self):
        model = build_manager_lp(random_problem(np.random.default_rng(22), 3, 2))
        back = parse_mps(export_mps(model))
        assert highs(back)[1] == pytest.approx(solve(model).objective, abs=1e-6)
