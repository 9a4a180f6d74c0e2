"""Zero-intelligence traders: endowment, quoting, target choice and imitation."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .climate import ForcingKind
from .market import SecuritySet

INITIAL_CASH = 1.0


class IdeologyMode(enum.Enum):
    """How a trader's ideology draw maps to the chance of imitating a richer neighbour.

    ``RESIST``: adoption probability is ``1 - ideo_i`` (strong ideology, rare switching).
    ``LITERAL``: adoption probability is ``ideo_i`` itself.
    """

    RESIST = "resist"
    LITERAL = "literal"


@dataclass(eq=False)
class Trader:
    id: int
    belief: ForcingKind
    risk_tak: float
    ideo: float
    cash: float = INITIAL_CASH
    holdings: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def ensure_securities(self, k: int) -> None:
        if self.holdings.shape != (k,):
            held = self.holdings
            self.holdings = np.zeros(k, dtype=np.int64)
            self.holdings[: min(k, len(held))] = held[:k]


def init_traders(n: int, risk_tak_max: float, ideo_max: float, rng: np.random.Generator) -> list[Trader]:
    """Create ``n`` traders with 1 ECU each, half believing each climate model.

    With odd ``n`` the leftover trader's belief is a coin flip.
    """
    if n < 2:
        raise ValueError("need at least two traders")
    if not (0.0 <= risk_tak_max <= 1.0 and 0.0 <= ideo_max <= 1.0):
        raise ValueError("risk_tak_max and ideo_max must lie in [0, 1]")
    half = n // 2
    beliefs = [ForcingKind.LOG_CO2] * half + [ForcingKind.TSI] * half
    if n % 2:
        beliefs.append(ForcingKind.LOG_CO2 if rng.random() < 0.5 else ForcingKind.TSI)
    order = rng.permutation(n)
    risk = rng.uniform(0.0, risk_tak_max, size=n)
    ideo = rng.uniform(0.0, ideo_max, size=n)
    return [
        Trader(id=i, belief=beliefs[order[i]], risk_tak=float(risk[i]), ideo=float(ideo[i]))
        for i in range(n)
    ]


def reservation_prices(predictive_bins: np.ndarray) -> np.ndarray:
    # Risk neutrality: a 1-ECU binary claim is worth its probability.
    return np.asarray(predictive_bins, dtype=float).copy()


def quote_prices(reserv, risk_tak, rng: np.random.Generator):
    """Random bid below and ask above the reservation price, clamped to [0, 1].

    Works elementwise on arrays, one quote pair per entry.
    """
    reserv = np.asarray(reserv, dtype=float)
    risk_tak = np.asarray(risk_tak, dtype=float)
    shape = np.broadcast(reserv, risk_tak).shape
    u_buy = rng.random(shape)
    u_sell = rng.random(shape)
    buy = (1.0 - risk_tak) * reserv + u_buy * risk_tak * reserv
    sell = reserv + u_sell * risk_tak * reserv
    buy = np.clip(buy, 0.0, 1.0)
    sell = np.clip(sell, 0.0, 1.0)
    if shape == ():
        return float(buy), float(sell)
    return buy, sell


def choose_targets(trader: Trader, securities: SecuritySet, rng: np.random.Generator) -> tuple[int, int | None]:
    """Any security to buy; a security actually held to sell, if there is one."""
    buy_bin = int(rng.integers(securities.k))
    held = np.flatnonzero(trader.holdings >= 1) if len(trader.holdings) else np.empty(0, dtype=int)
    sell_bin = int(held[rng.integers(len(held))]) if len(held) else None
    return buy_bin, sell_bin


def adoption_probability(trader: Trader, mode: IdeologyMode = IdeologyMode.RESIST) -> float:
    return 1.0 - trader.ideo if mode is IdeologyMode.RESIST else trader.ideo


def revise_belief(
    trader: Trader,
    richest_neighbor_wealth: float,
    richest_neighbor_belief: ForcingKind,
    rng: np.random.Generator,
    mode: IdeologyMode = IdeologyMode.RESIST,
) -> ForcingKind:
    """Belief the trader holds after looking at its richest neighbour.

    Only a strictly richer neighbour with a different model is a candidate
    for imitation. The caller applies the returned belief, which keeps
    revisions simultaneous across the population.
    """
    if richest_neighbor_wealth <= trader.cash or richest_neighbor_belief is trader.belief:
        return trader.belief
    if rng.random() < adoption_probability(trader, mode):
        return richest_neighbor_belief
    return trader.belief
