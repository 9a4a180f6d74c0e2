"""Temperature-range securities and a one-unit continuous double auction."""

from __future__ import annotations

import csv
import enum
import heapq
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

DEFAULT_K = 10
DEFAULT_LO = -1.0
DEFAULT_HI = 3.0


@dataclass(frozen=True)
class SecuritySet:
    """``k`` binary contracts partitioning the anomaly axis at ``edges``.

    A value equal to an edge belongs to the bin above it.
    """

    edges: tuple[float, ...]

    def __post_init__(self):
        edges = tuple(float(e) for e in self.edges)
        if not edges:
            raise ValueError("need at least one edge (k >= 2)")
        if not all(math.isfinite(e) for e in edges):
            raise ValueError("edges must be finite")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValueError("edges must be strictly ascending")
        object.__setattr__(self, "edges", edges)

    @property
    def k(self) -> int:
        return len(self.edges) + 1

    def bin_index(self, values):
        return np.searchsorted(np.asarray(self.edges), values, side="right")

    def winning_bin(self, temperature: float) -> int:
        if not math.isfinite(temperature):
            raise ValueError("settlement temperature must be finite")
        return int(self.bin_index(temperature))


def make_binning(k: int = DEFAULT_K, lo: float = DEFAULT_LO, hi: float = DEFAULT_HI) -> SecuritySet:
    """``k - 2`` equal-width bins over ``[lo, hi]`` plus two open-ended tails."""
    if k < 2:
        raise ValueError("k must be at least 2")
    if not lo < hi:
        raise ValueError("lo must be below hi")
    if k == 2:
        return SecuritySet(((lo + hi) / 2.0,))
    return SecuritySet(tuple(np.linspace(lo, hi, k - 1)))


class Side(enum.Enum):
    BUY = "BUY"
    SELL = "SELL"


@dataclass(frozen=True)
class Order:
    trader_id: int
    security: int
    side: Side
    limit_price: float
    arrival_rank: int

    def __post_init__(self):
        if not 0.0 <= self.limit_price <= 1.0:
            raise ValueError(f"limit price {self.limit_price} outside [0, 1]")
        if self.security < 0:
            raise ValueError("security index must be non-negative")


@dataclass(frozen=True)
class Trade:
    buyer_id: int
    seller_id: int
    security: int
    price: float
    year: int


class OrderRejected(ValueError):
    def __init__(self, order: Order, reason: str):
        self.order = order
        self.reason = reason
        super().__init__(f"{order.side.value} order from trader {order.trader_id} rejected: {reason}")


@dataclass
class Account:
    """Cash and per-security holdings of one participant."""

    cash: float
    holdings: np.ndarray


class OrderBook:
    """Resting one-unit orders per security, best price first, then earliest arrival."""

    def __init__(self, k: int):
        self.k = k
        self._bids: list[list] = [[] for _ in range(k)]
        self._asks: list[list] = [[] for _ in range(k)]

    def __len__(self) -> int:
        return sum(len(b) for b in self._bids) + sum(len(a) for a in self._asks)

    def rest(self, order: Order) -> None:
        if order.side is Side.BUY:
            heapq.heappush(self._bids[order.security], (-order.limit_price, order.arrival_rank, order))
        else:
            heapq.heappush(self._asks[order.security], (order.limit_price, order.arrival_rank, order))

    def bids(self, security: int) -> list[Order]:
        return [entry[2] for entry in sorted(self._bids[security])]

    def asks(self, security: int) -> list[Order]:
        return [entry[2] for entry in sorted(self._asks[security])]

    def best_bid(self, security: int) -> float | None:
        side = self._bids[security]
        return -side[0][0] if side else None

    def best_ask(self, security: int) -> float | None:
        side = self._asks[security]
        return side[0][0] if side else None

    def is_uncrossed(self) -> bool:
        for s in range(self.k):
            bid, ask = self.best_bid(s), self.best_ask(s)
            if bid is not None and ask is not None and bid >= ask:
                return False
        return True

    def pop_match(self, incoming: Order, accounts: Sequence[Account]) -> Order | None | bool:
        """Remove and return the best resting counter-order that crosses ``incoming``.

        Returns ``None`` when nothing crosses and ``False`` when the best
        crossing order is the incoming trader's own (self-trade prevention:
        the incoming order is cancelled). Resting orders whose owner can no
        longer honour them are dropped on the way.
        """
        if incoming.side is Side.BUY:
            heap = self._asks[incoming.security]

            def crosses(key):
                return key <= incoming.limit_price
        else:
            heap = self._bids[incoming.security]

            def crosses(key):
                return -key >= incoming.limit_price

        while heap and crosses(heap[0][0]):
            resting = heap[0][2]
            if resting.trader_id == incoming.trader_id:
                return False
            heapq.heappop(heap)
            if _can_honour(resting, accounts[resting.trader_id]):
                return resting
        return None

    def clear(self) -> None:
        for s in range(self.k):
            self._bids[s].clear()
            self._asks[s].clear()


def _can_honour(order: Order, account: Account) -> bool:
    if order.side is Side.BUY:
        return account.cash >= order.limit_price
    return account.holdings[order.security] >= 1


def _validate(order: Order, account: Account, k: int) -> None:
    if order.security >= k:
        raise OrderRejected(order, f"security {order.security} out of range (k={k})")
    if order.side is Side.BUY and account.cash < order.limit_price:
        raise OrderRejected(order, f"cash {account.cash:.6g} below limit {order.limit_price:.6g}")
    if order.side is Side.SELL and account.holdings[order.security] < 1:
        raise OrderRejected(order, f"holds no units of security {order.security}")


def _execute(buyer: Account, seller: Account, security: int, price: float) -> None:
    buyer.cash -= price
    seller.cash += price
    buyer.holdings[security] += 1
    seller.holdings[security] -= 1


def submit_arrival(
    book: OrderBook,
    buy: Order | None,
    sell: Order | None,
    accounts: Sequence[Account],
    year: int = 0,
) -> list[Trade]:
    """Process one trader's visit: match the buy, then the sell, resting any remainder.

    Execution happens at the resting order's price. Both orders are
    validated before anything changes; an invalid order raises
    :class:`OrderRejected` and leaves book and accounts untouched.
    """
    for order, side in ((buy, Side.BUY), (sell, Side.SELL)):
        if order is not None:
            if order.side is not side:
                raise OrderRejected(order, f"expected a {side.value} order")
            _validate(order, accounts[order.trader_id], book.k)
    if buy is not None and sell is not None and buy.trader_id != sell.trader_id:
        raise OrderRejected(sell, "buy and sell of one arrival must come from the same trader")

    trades = []
    for order in (buy, sell):
        if order is None:
            continue
        resting = book.pop_match(order, accounts)
        if resting is False:
            continue
        if resting is None:
            book.rest(order)
            continue
        price = resting.limit_price
        if order.side is Side.BUY:
            buyer_id, seller_id = order.trader_id, resting.trader_id
        else:
            buyer_id, seller_id = resting.trader_id, order.trader_id
        _execute(accounts[buyer_id], accounts[seller_id], order.security, price)
        trades.append(Trade(buyer_id, seller_id, order.security, price, year))
    return trades


def end_period(book: OrderBook) -> OrderBook:
    """Drop every outstanding order; no cash or securities move."""
    book.clear()
    return book


def endow_complete_sets(accounts: Iterable[Account], units: int = 1) -> int:
    """Bank issues ``units`` of every security to each account; returns units issued per security."""
    issued = 0
    for acc in accounts:
        acc.holdings += units
        issued += units
    return issued


def settle_sequence(accounts: Sequence[Account], securities: SecuritySet, realized_temp: float) -> np.ndarray:
    """Pay 1 ECU per unit of the winning security, then expire all holdings."""
    winner = securities.winning_bin(realized_temp)
    payouts = np.zeros(len(accounts))
    for i, acc in enumerate(accounts):
        payouts[i] = float(acc.holdings[winner])
        acc.cash += payouts[i]
        acc.holdings[:] = 0
    return payouts


TRADE_LOG_COLUMNS = ("year", "buyer", "seller", "bin", "price")


def write_trade_log(trades: Iterable[Trade], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRADE_LOG_COLUMNS)
        for t in trades:
            writer.writerow([t.year, t.buyer_id, t.seller_id, t.security, repr(t.price)])


def read_trade_log(path) -> list[Trade]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRADE_LOG_COLUMNS:
            raise ValueError(f"{path}: expected header {','.join(TRADE_LOG_COLUMNS)}")
        return [
            Trade(int(r["buyer"]), int(r["seller"]), int(r["bin"]), float(r["price"]), int(r["year"]))
            for r in reader
        ]
