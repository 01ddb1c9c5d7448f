import datetime as dt
import http.server
import threading

import numpy as np
import pytest

from riskquad import data as D


def macro(values, start_day=1):
    dates = [f"2025-01-{d:02d}" for d in range(start_day, start_day + len(values))]
    return D.MacroSeries("rate", dates, values), dates


# --- compute_returns -------------------------------------------------------


def prices(rows, tickers=("A",)):
    dates = [f"2025-01-{d:02d}" for d in range(1, len(rows) + 1)]
    return D.PriceTable(dates, tickers, np.array(rows, dtype=float).reshape(len(rows), len(tickers)))


def test_returns_simple():
    r = D.compute_returns(prices([100, 110]))
    assert r.returns[0, 0] == pytest.approx(0.10, abs=1e-15)
    assert r.dates == ("2025-01-02",)


def test_returns_constant_prices():
    r = D.compute_returns(prices([5, 5, 5, 5]))
    assert np.all(r.returns == 0.0)


def test_returns_hand_example():
    r = D.compute_returns(prices([100, 90, 99]))
    assert r.returns[:, 0] == pytest.approx([-0.10, 0.10], abs=1e-15)


def test_returns_need_two_dates():
    with pytest.raises(D.DataError):
        D.compute_returns(prices([100]))


def test_nonpositive_price_rejected():
    with pytest.raises(D.DataError):
        prices([100, 0])
    with pytest.raises(D.DataError):
        prices([100, -3])


def test_compounding_reconstructs_price_ratio():
    rng = np.random.default_rng(4)
    p = 50 * np.cumprod(1 + rng.normal(0, 0.02, size=(40, 3)), axis=0)
    r = D.compute_returns(_table(p))
    for j in range(3):
        acc = 1.0
        for v in r.returns[:, j]:
            acc *= 1 + v
        assert abs(acc - p[-1, j] / p[0, j]) <= 1e-12


def _table(p):
    d0 = dt.date(2024, 1, 1)
    dates = [(d0 + dt.timedelta(days=k)).isoformat() for k in range(p.shape[0])]
    return D.PriceTable(dates, tuple(f"T{j}" for j in range(p.shape[1])), p)


def test_dates_must_increase():
    with pytest.raises(D.DataError):
        D.PriceTable(["2025-01-02", "2025-01-01"], ("A",), [[1.0], [2.0]])
    with pytest.raises(D.MalformedDataError):
        D.PriceTable(["2025-13-02"], ("A",), [[1.0]])


# --- select_periods ----------------------------------------------------------


def test_above_median_lower_middle_rule():
    m, dates = macro([1, 2, 3, 4])
    mask = D.select_periods(m, D.AnalystRule("rate_above_median", "rate"), dates)
    assert mask.tolist() == [False, False, True, True]


def test_below_median_includes_median():
    m, dates = macro([1, 2, 3, 4])
    mask = D.select_periods(m, D.AnalystRule("rate_below_median", "rate"), dates)
    assert mask.tolist() == [True, True, False, False]


def test_all_equal_above_is_empty():
    m, dates = macro([2.5] * 6)
    assert not D.select_periods(m, D.AnalystRule("rate_above_median", "rate"), dates).any()
    assert D.select_periods(m, D.AnalystRule("rate_below_median", "rate"), dates).all()


def test_custom_mask_verbatim():
    mask = (True, False, True)
    got = D.select_periods(None, D.AnalystRule("custom_mask", mask=mask), ["a", "b", "c"])
    assert got.tolist() == list(mask)


def test_custom_mask_length_mismatch():
    with pytest.raises(D.DataError):
        D.select_periods(None, D.AnalystRule("custom_mask", mask=(True,)), ["a", "b"])


def test_forward_fill_alignment():
    m = D.MacroSeries("rate", ["2025-01-01", "2025-01-03"], [1.0, 5.0])
    got = D.align_macro(m, ["2025-01-01", "2025-01-02", "2025-01-03", "2025-01-06"])
    assert got.tolist() == [1.0, 1.0, 5.0, 5.0]


def test_macro_must_cover_window_start():
    m = D.MacroSeries("rate", ["2025-01-05"], [1.0])
    with pytest.raises(D.DataError):
        D.select_periods(m, D.AnalystRule("rate_above_median", "rate"), ["2025-01-04", "2025-01-05"])


def test_above_below_partition_non_median_days():
    rng = np.random.default_rng(0)
    for _ in range(50):
        vals = rng.integers(0, 6, size=int(rng.integers(1, 30))).astype(float)
        m, dates = macro(vals.tolist())
        up = D.select_periods(m, D.AnalystRule("rate_above_median", "rate"), dates)
        dn = D.select_periods(m, D.AnalystRule("rate_below_median", "rate"), dates)
        assert not np.any(up & dn)
        med = D.lower_median(vals)
        assert np.all((up | dn)[vals != med])


def test_lower_median():
    assert D.lower_median([4, 1, 3, 2]) == 2
    assert D.lower_median([3, 1, 2]) == 2
    assert D.lower_median([7]) == 7


def test_cpi_rule_uses_year_over_year():
    # level rises steadily (every level above the first half) but the yearly
    # change falls: the YoY reading selects the early days as "above"
    months = [f"{y}-{m:02d}-01" for y in (2023, 2024) for m in range(1, 13)]
    level = [100.0]
    for k in range(1, 24):
        level.append(level[-1] * (1 + (0.01 if k < 12 else 0.004 - 0.0003 * (k - 12))))
    cpi = D.MacroSeries("cpi", months, level)
    window = ["2024-01-15", "2024-04-15", "2024-08-15", "2024-12-15"]
    up = D.select_periods(cpi, D.AnalystRule("cpi_above_median", "cpi"), window)
    assert up.tolist() == [True, True, False, False]
    yoy = D.year_over_year(cpi)
    assert yoy.dates[0] == "2024-01-01"
    assert yoy.values[0] == pytest.approx(level[12] / level[0] - 1, abs=1e-15)


def test_year_over_year_needs_history():
    m, _ = macro([1.0, 2.0])
    with pytest.raises(D.DataError):
        D.year_over_year(m)


# --- theta -----------------------------------------------------------------


def test_theta_all_true_is_column_means():
    R = np.array([[0.1, 0.0], [0.3, 0.2]])
    assert D.estimate_theta(R, [True, True]).tolist() == pytest.approx([0.2, 0.1], abs=1e-15)


def test_theta_single_day():
    R = np.array([[0.1, 0.0], [0.3, 0.2]])
    assert D.estimate_theta(R, [False, True]).tolist() == [0.3, 0.2]


def test_theta_hand_example():
    R = np.array([[0.1], [-0.1], [0.3]])
    assert D.estimate_theta(R, [True, False, True])[0] == pytest.approx(0.2, abs=1e-15)


def test_theta_empty_selection():
    with pytest.raises(D.DataError):
        D.estimate_theta(np.zeros((3, 2)), [False] * 3)


def test_theta_permutation_invariant():
    rng = np.random.default_rng(1)
    R = rng.normal(size=(25, 4))
    mask = rng.random(25) < 0.5
    mask[0] = True
    perm = rng.permutation(25)
    assert np.array_equal(D.estimate_theta(R, mask), D.estimate_theta(R[perm], mask[perm]))


def test_manager_theta_examples():
    assert D.manager_theta([[0.0, 0.0], [0.2, 0.2]], [0.5, 0.5]).tolist() == pytest.approx([0.1, 0.1])
    assert D.manager_theta([[1, 2], [3, 6]], [0.25, 0.75]).tolist() == [2.5, 5.0]
    assert D.manager_theta([[1, 2], [3, 6]], [0.0, 1.0]).tolist() == [3.0, 6.0]


def test_manager_theta_length_mismatch():
    with pytest.raises(ValueError):
        D.manager_theta([[1, 2], [3]], [0.5, 0.5])
    with pytest.raises(ValueError):
        D.manager_theta([[1, 2]], [0.5, 0.5])


def test_manager_theta_within_bounds():
    rng = np.random.default_rng(2)
    for _ in range(50):
        n = int(rng.integers(1, 5))
        th = rng.normal(size=(n, 6))
        got = D.manager_theta(th, rng.dirichlet(np.ones(n)))
        assert np.all(got >= th.min(axis=0) - 1e-15) and np.all(got <= th.max(axis=0) + 1e-15)


# --- CSV ingestion -------------------------------------------------------------


def test_read_prices_csv_forward_fill_and_drop():
    rows = ["date,A,B,C"]
    for k in range(1, 41):
        a = "" if k == 20 else f"{100 + k}"  # 1 gap in 40 days: kept, filled
        b = "" if k % 4 == 0 else "50"  # 25% missing: dropped
        rows.append(f"2025-02-{k:02d},{a},{b},7" if k <= 28 else f"2025-03-{k - 28:02d},{a},{b},7")
    with pytest.warns(RuntimeWarning, match="dropping B"):
        t = D.read_prices_csv("\n".join(rows))
    assert t.tickers == ("A", "C")
    assert t.prices[19, 0] == t.prices[18, 0] == 119.0


def test_ragged_start_trimmed():
    rows = ["date,A,B"] + [f"2025-01-{k:02d},{10 + k},{'' if k == 1 else 5}" for k in range(1, 31)]
    with pytest.warns(RuntimeWarning, match="trimming 1"):
        t = D.read_prices_csv("\n".join(rows))
    assert t.dates[0] == "2025-01-02"


def test_malformed_prices():
    with pytest.raises(D.MalformedDataError):
        D.read_prices_csv("when,A\n2025-01-01,1")
    with pytest.raises(D.MalformedDataError):
        D.read_prices_csv("date,A\n2025-01-01,abc")
    with pytest.raises(D.MalformedDataError):
        D.read_prices_csv("date,A\n2025-01-01,1,2")
    with pytest.raises(D.EmptyDataError):
        D.read_prices_csv("date,A\n")
    with pytest.raises(D.EmptyDataError):
        D.read_prices_csv("")


def test_macro_csv_skips_unpublished():
    m = D.read_macro_csv("date,value\n2025-01-01,4.1\n2025-01-02,.\n2025-01-03,4.3\n", "rate")
    assert m.dates == ("2025-01-01", "2025-01-03")
    with pytest.raises(D.EmptyDataError):
        D.read_macro_csv("date,value\n2025-01-01,.\n")


def test_missing_file_is_data_error(tmp_path):
    with pytest.raises(D.DataError):
        D.load_prices(tmp_path / "nope.csv")


def test_write_read_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    t = _table(rng.uniform(1, 100, size=(12, 3)))
    D.write_prices_csv(t, tmp_path / "p.csv")
    back = D.load_prices(tmp_path / "p.csv")
    assert back.dates == t.dates and back.tickers == t.tickers and np.array_equal(back.prices, t.prices)


# --- fetch against a local server ----------------------------------------------

SERIES = {
    "AAA": "Date,Open,Close,Adj Close\n2025-01-02,1,10,9.5\n2025-01-03,1,11,10.5\n2025-01-06,1,12,11.5\n",
    "BBB": "date,close\n2025-01-02,20\n2025-01-03,21\n2025-01-06,22\n",
    "OLD": "date,close\n2020-01-02,20\n",
    "BAD": "date,close\n2025-01-02,abc\n",
    "NOCOL": "stamp,close\n2025-01-02,1\n",
}


class _Handler(http.server.BaseHTTPRequestHandler):
    def do_GET(self):
        ticker = self.path.split("/")[-1].split("?")[0]
        body = SERIES.get(ticker)
        if body is None:
            self.send_error(404)
            return
        data = body.encode()
        self.send_response(200)
        self.send_header("Content-Type", "text/csv")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture(scope="module")
def server():
    srv = http.server.ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
    th = threading.Thread(target=srv.serve_forever, daemon=True)
    th.start()
    yield f"http://127.0.0.1:{srv.server_address[1]}/px/{{ticker}}?from={{start}}&to={{end}}"
    srv.shutdown()


def test_fetch_two_tickers_aligned(server):
    t = D.fetch_prices(server, ["AAA", "BBB"], "2025-01-01", "2025-01-31", workers=2)
    assert t.tickers == ("AAA", "BBB")
    assert t.dates == ("2025-01-02", "2025-01-03", "2025-01-06")
    assert t.prices[:, 0].tolist() == [9.5, 10.5, 11.5]  # adjusted close preferred
    assert t.prices[:, 1].tolist() == [20, 21, 22]


def test_fetch_ticker_missing_range_dropped(server):
    with pytest.warns(RuntimeWarning, match="dropping OLD"):
        t = D.fetch_prices(server, ["AAA", "OLD"], "2025-01-01", "2025-01-31")
    assert t.tickers == ("AAA",)


def test_fetch_404_names_ticker(server):
    with pytest.raises(D.FetchError, match="ZZZ.*404") as ei:
        D.fetch_prices(server, ["AAA", "ZZZ"], "2025-01-01", "2025-01-31")
    assert ei.value.ticker == "ZZZ"


def test_fetch_malformed(server):
    with pytest.raises(D.MalformedDataError):
        D.fetch_prices(server, ["BAD"], "2025-01-01", "2025-01-31")
    with pytest.raises(D.MalformedDataError):
        D.fetch_prices(server, ["NOCOL"], "2025-01-01", "2025-01-31")


def test_fetch_empty(server):
    with pytest.raises(D.EmptyDataError):
        D.fetch_prices(server, ["OLD"], "2025-01-01", "2025-01-31")


def test_fetch_errors_are_distinct():
    assert not issubclass(D.FetchError, D.MalformedDataError)
    assert not issubclass(D.MalformedDataError, D.EmptyDataError)
    assert all(issubclass(c, D.DataError) for c in (D.FetchError, D.MalformedDataError, D.EmptyDataError))


def test_fetch_deterministic_across_workers(server):
    a = D.fetch_prices(server, ["BBB", "AAA"], "2025-01-01", "2025-01-31", workers=1)
    b = D.fetch_prices(server, ["BBB", "AAA"], "2025-01-01", "2025-01-31", workers=4)
    assert a.tickers == b.tickers == ("BBB", "AAA")
    assert np.array_equal(a.prices, b.prices)
