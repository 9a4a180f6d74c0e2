import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from climarket.market import (
    Account,
    Order,
    OrderBook,
    OrderRejected,
    SecuritySet,
    Side,
    Trade,
    end_period,
    endow_complete_sets,
    make_binning,
    read_trade_log,
    settle_sequence,
    submit_arrival,
    write_trade_log,
)

from market_fuzz import fuzz


def accounts(n=4, k=4, cash=1.0, units=1):
    return [Account(cash, np.full(k, units, dtype=np.int64)) for _ in range(n)]


def buy(i, sec, p, r):
    return Order(i, sec, Side.BUY, p, r)


def sell(i, sec, p, r):
    return Order(i, sec, Side.SELL, p, r)


def test_binning_examples():
    assert make_binning(4, 0.0, 2.0).edges == (0.0, 1.0, 2.0)
    assert make_binning(2, 0.0, 1.0).edges == (0.5,)
    b = make_binning()
    assert b.k == 10
    assert np.allclose(b.edges, np.arange(-1.0, 3.01, 0.5))


@pytest.mark.parametrize("k,lo,hi", [(1, 0, 1), (4, 1, 1), (4, 2, 1)])
def test_binning_errors(k, lo, hi):
    with pytest.raises(ValueError):
        make_binning(k, lo, hi)


def test_security_set_validation():
    with pytest.raises(ValueError):
        SecuritySet((1.0, 1.0))
    with pytest.raises(ValueError):
        SecuritySet((float("inf"),))


def test_winning_bin_edges():
    b = SecuritySet((0.0, 1.0))
    assert [b.winning_bin(t) for t in (-5.0, 0.0, 0.5, 1.0, 9.0)] == [0, 1, 1, 2, 2]
    with pytest.raises(ValueError):
        b.winning_bin(float("nan"))


def test_order_validation():
    with pytest.raises(ValueError):
        buy(0, 0, 1.01, 0)
    with pytest.raises(ValueError):
        buy(0, -1, 0.5, 0)


def test_resting_price_execution():
    accs = accounts()
    book = OrderBook(4)
    assert submit_arrival(book, None, sell(1, 2, 0.40, 0), accs) == []
    trades = submit_arrival(book, buy(0, 2, 0.45, 1), None, accs, year=2020)
    assert trades == [Trade(0, 1, 2, 0.40, 2020)]
    assert accs[0].cash == pytest.approx(0.60) and accs[1].cash == pytest.approx(1.40)
    assert accs[0].holdings[2] == 2 and accs[1].holdings[2] == 0
    assert len(book) == 0


def test_empty_book_rests():
    book = OrderBook(4)
    assert submit_arrival(book, buy(0, 1, 0.45, 0), None, accounts()) == []
    assert book.best_bid(1) == 0.45


def test_time_priority():
    accs = accounts()
    book = OrderBook(4)
    submit_arrival(book, None, sell(1, 0, 0.40, 1), accs)
    submit_arrival(book, None, sell(2, 0, 0.40, 2), accs)
    trades = submit_arrival(book, buy(0, 0, 0.50, 3), None, accs)
    assert trades[0].seller_id == 1


def test_incoming_sell_hits_highest_bid():
    accs = accounts()
    book = OrderBook(4)
    submit_arrival(book, buy(1, 3, 0.30, 0), None, accs)
    submit_arrival(book, buy(2, 3, 0.35, 1), None, accs)
    trades = submit_arrival(book, None, sell(0, 3, 0.20, 2), accs)
    assert trades == [Trade(2, 0, 3, 0.35, 0)]


def test_rejections_leave_state_alone():
    accs = accounts(cash=0.2)
    accs[0].holdings[:] = 0
    book = OrderBook(4)
    submit_arrival(book, buy(1, 0, 0.1, 0), None, accs)
    snapshot = [(a.cash, a.holdings.copy()) for a in accs]
    for b, s in [(buy(0, 0, 0.5, 1), None), (None, sell(0, 1, 0.1, 1)), (buy(0, 0, 0.1, 1), sell(0, 2, 0.1, 2)),
                 (buy(0, 7, 0.1, 1), None), (buy(2, 0, 0.1, 1), sell(3, 0, 0.1, 2))]:
        with pytest.raises(OrderRejected):
            submit_arrival(book, b, s, accs)
    assert [(a.cash, a.holdings.tolist()) for a in accs] == [(c, h.tolist()) for c, h in snapshot]
    assert len(book) == 1


def test_self_trade_cancels_incoming():
    accs = accounts()
    book = OrderBook(4)
    submit_arrival(book, None, sell(0, 1, 0.3, 0), accs)
    assert submit_arrival(book, buy(0, 1, 0.5, 1), None, accs) == []
    assert book.best_ask(1) == 0.3 and book.best_bid(1) is None


def test_stale_resting_order_dropped():
    accs = accounts()
    book = OrderBook(4)
    submit_arrival(book, None, sell(1, 0, 0.3, 0), accs)
    accs[1].holdings[0] = 0  # sold elsewhere in the meantime
    trades = submit_arrival(book, buy(0, 0, 0.5, 1), None, accs)
    assert trades == [] and book.best_bid(0) == 0.5 and book.best_ask(0) is None


def test_end_period():
    accs = accounts(n=8)
    book = OrderBook(4)
    for i in range(7):
        submit_arrival(book, buy(i, i % 4, 0.01 * (i + 1), i), None, accs)
    assert len(book) == 7
    before = [(a.cash, a.holdings.tolist()) for a in accs]
    end_period(book)
    assert len(book) == 0
    end_period(book)
    assert len(book) == 0
    assert [(a.cash, a.holdings.tolist()) for a in accs] == before


def test_endowment():
    accs = [Account(1.0, np.zeros(3, dtype=np.int64)) for _ in range(5)]
    assert endow_complete_sets(accs) == 5
    assert all(a.holdings.tolist() == [1, 1, 1] for a in accs)


def test_settlement_examples():
    bins = SecuritySet((0.0, 1.0))
    accs = [Account(0.5, np.array([0, 3, 0])), Account(0.5, np.array([2, 0, 1]))]
    pay = settle_sequence(accs, bins, 0.7)
    assert pay.tolist() == [3.0, 0.0]
    assert accs[0].cash == 3.5 and accs[1].cash == 0.5
    assert all(not a.holdings.any() for a in accs)


def test_replay_determinism():
    def stream():
        accs = accounts(n=6)
        book = OrderBook(4)
        rng = np.random.default_rng(42)
        out = []
        for r in range(200):
            i = int(rng.integers(6))
            b = buy(i, int(rng.integers(4)), round(float(rng.uniform(0, 0.5)), 3), 2 * r)
            held = np.flatnonzero(accs[i].holdings)
            s = sell(i, int(held[0]), round(float(rng.random()), 3), 2 * r + 1) if len(held) else None
            if accs[i].cash < b.limit_price:
                b = None
            out += submit_arrival(book, b, s, accs)
        return out
    assert stream() == stream()


def test_trade_log_round_trip(tmp_path):
    trades = [Trade(1, 2, 3, 0.1 + 0.2, 2020), Trade(0, 4, 9, 1.0, 2021)]
    write_trade_log(trades, tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "year,buyer,seller,bin,price"
    assert read_trade_log(tmp_path / "t.csv") == trades


def test_fuzz_200_seeds():
    assert [v for seed in range(200) for v in fuzz(seed)] == []


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 20), st.integers(2, 12))
def test_fuzz_hypothesis(seed, n, k):
    assert fuzz(seed, n_traders=n, k=k, periods=3, arrivals=30) == []
