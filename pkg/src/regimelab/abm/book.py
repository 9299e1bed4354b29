"""Limit order book with price-time priority and a naive reference matcher.

Matching rules:
  * marketable orders execute against the best opposing level, FIFO within
    a level, at the resting order's price, until exhausted or no longer
    marketable;
  * an agent never trades against its own resting order (the order is
    skipped in place, keeping its queue priority);
  * the unfilled remainder of a limit order rests; market orders are
    converted to aggressive limits at the opposing extreme and any
    remainder is dropped.

``NaiveBook`` re-implements the same semantics by rescanning a flat list of
resting orders on every fill, as an independent oracle for the fast matcher.
"""

from __future__ import annotations

import bisect
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from ..errors import ConfigurationError

MARKET_OFFSET = 0.002    # fraction of opposite best used for marketable-limit conversion;
                         # bounds the depth a single market order can walk


@dataclass
class Order:
    """Single order; ``price None`` marks a market order before conversion."""

    id: int
    side: str                   # "bid" or "ask"
    price: Optional[float]
    qty: float
    agent_id: int
    arrival: tuple = (0, 0)     # (step, intra-step sequence)

    def __post_init__(self):
        if self.side not in ("bid", "ask"):
            raise ConfigurationError(f"order side {self.side!r}")
        if self.qty <= 0:
            raise ConfigurationError(f"order quantity {self.qty} must be positive")
        if self.price is not None and self.price <= 0:
            raise ConfigurationError(f"order price {self.price} must be positive")


@dataclass(frozen=True)
class Trade:
    """One fill; maker is the resting side, price is the maker's price."""

    price: float
    qty: float
    maker_order_id: int
    taker_order_id: int
    maker_agent: int
    taker_agent: int
    taker_side: str             # side of the incoming order

    def key(self) -> tuple:
        return (self.maker_order_id, self.taker_order_id, self.price, self.qty)


class OrderBook:
    """Resting bids (descending) and asks (ascending), FIFO within a level."""

    def __init__(self):
        self._bids: dict = {}
        self._asks: dict = {}
        self._bid_prices: list = []      # ascending; best bid is the last
        self._ask_prices: list = []      # ascending; best ask is the first
        self._index: dict = {}           # order id -> (side, price)

    # -- queries ----------------------------------------------------------

    def best_bid(self) -> Optional[float]:
        return self._bid_prices[-1] if self._bid_prices else None

    def best_ask(self) -> Optional[float]:
        return self._ask_prices[0] if self._ask_prices else None

    def mid(self) -> Optional[float]:
        bb, ba = self.best_bid(), self.best_ask()
        if bb is None or ba is None:
            return None
        return 0.5 * (bb + ba)

    def is_crossed(self) -> bool:
        bb, ba = self.best_bid(), self.best_ask()
        return bb is not None and ba is not None and bb >= ba

    def depth(self, side: str) -> float:
        levels = self._bids if side == "bid" else self._asks
        return sum(o.qty for q in levels.values() for o in q)

    def orders(self) -> list:
        out = [o for q in self._bids.values() for o in q]
        out += [o for q in self._asks.values() for o in q]
        return out

    # -- mutation ---------------------------------------------------------

    def _levels(self, side: str):
        return (self._bids, self._bid_prices) if side == "bid" else (self._asks, self._ask_prices)

    def rest(self, order: Order) -> None:
        levels, prices = self._levels(order.side)
        if order.price not in levels:
            levels[order.price] = deque()
            bisect.insort(prices, order.price)
        levels[order.price].append(order)
        self._index[order.id] = (order.side, order.price)

    def cancel(self, order_id: int) -> Optional[Order]:
        loc = self._index.pop(order_id, None)
        if loc is None:
            return None
        side, price = loc
        levels, prices = self._levels(side)
        queue = levels[price]
        for i, o in enumerate(queue):
            if o.id == order_id:
                del queue[i]
                break
        if not queue:
            del levels[price]
            prices.pop(bisect.bisect_left(prices, price))
        return o

    def _drop_if_empty(self, side: str, price: float) -> None:
        levels, prices = self._levels(side)
        if not levels[price]:
            del levels[price]
            prices.pop(bisect.bisect_left(prices, price))


def match(book: OrderBook, incoming: Order) -> tuple[list, Optional[Order], list]:
    """Match an incoming order.

    Returns (trades, rested remainder or None, self-cancelled orders).
    Market orders (price None) become aggressive limits at the opposing
    extreme plus a large offset; their remainder never rests. If a limit
    remainder would cross the taker's *own* resting orders (the only orders
    it can cross, having matched everything else), those are cancelled
    before resting so the book never ends up crossed.
    """
    is_market = incoming.price is None
    order = incoming
    if is_market:
        opposite = book.best_ask() if order.side == "bid" else book.best_bid()
        if opposite is None:
            return [], None, []
        limit = opposite * (1 + MARKET_OFFSET) if order.side == "bid" else opposite * (1 - MARKET_OFFSET)
        order = Order(order.id, order.side, max(limit, 1e-12), order.qty,
                      order.agent_id, order.arrival)

    trades: list = []
    remaining = order.qty
    opp_side = "ask" if order.side == "bid" else "bid"
    opp_levels, opp_prices = book._levels(opp_side)

    def _marketable(level_price: float) -> bool:
        if order.side == "bid":
            return level_price <= order.price
        return level_price >= order.price

    # levels can only shrink during matching, so one priority-ordered
    # snapshot covers the whole walk; levels holding only the taker's own
    # orders are passed over without ending the scan
    snapshot = list(opp_prices) if order.side == "bid" else list(reversed(opp_prices))
    for level_price in snapshot:
        if remaining <= 0 or not _marketable(level_price):
            break
        queue = opp_levels.get(level_price)
        if queue is None:
            continue
        i = 0
        while i < len(queue) and remaining > 0:
            resting = queue[i]
            if resting.agent_id == order.agent_id:
                i += 1              # self-match prevention: skip in place
                continue
            fill = min(remaining, resting.qty)
            trades.append(Trade(level_price, fill, resting.id, order.id,
                                resting.agent_id, order.agent_id, order.side))
            remaining -= fill
            resting.qty -= fill
            if resting.qty <= 0:
                del queue[i]
                book._index.pop(resting.id, None)
            else:
                i += 1
        book._drop_if_empty(opp_side, level_price)

    rested = None
    self_cancelled: list = []
    if remaining > 0 and not is_market:
        crossing_own = [o for p in list(opp_prices) if _marketable(p)
                        for o in opp_levels[p] if o.agent_id == order.agent_id]
        for own in crossing_own:
            book.cancel(own.id)
            self_cancelled.append(own)
        rested = Order(order.id, order.side, order.price, remaining,
                       order.agent_id, order.arrival)
        book.rest(rested)
    return trades, rested, self_cancelled


class NaiveBook:
    """Reference matcher: flat order list, full rescan per fill."""

    def __init__(self):
        self.resting: list = []

    def best_bid(self):
        prices = [o.price for o in self.resting if o.side == "bid"]
        return max(prices) if prices else None

    def best_ask(self):
        prices = [o.price for o in self.resting if o.side == "ask"]
        return min(prices) if prices else None

    def cancel(self, order_id: int):
        for i, o in enumerate(self.resting):
            if o.id == order_id:
                return self.resting.pop(i)
        return None

    def submit(self, incoming: Order) -> tuple[list, Optional[Order], list]:
        is_market = incoming.price is None
        order = incoming
        if is_market:
            opposite = self.best_ask() if order.side == "bid" else self.best_bid()
            if opposite is None:
                return [], None, []
            limit = opposite * (1 + MARKET_OFFSET) if order.side == "bid" else opposite * (1 - MARKET_OFFSET)
            order = Order(order.id, order.side, max(limit, 1e-12), order.qty,
                          order.agent_id, order.arrival)

        trades = []
        remaining = order.qty
        opp_side = "ask" if order.side == "bid" else "bid"
        while remaining > 0:
            candidates = [o for o in self.resting
                          if o.side == opp_side and o.agent_id != order.agent_id]
            if order.side == "bid":
                candidates = [o for o in candidates if o.price <= order.price]
                candidates.sort(key=lambda o: (o.price, o.arrival, o.id))
            else:
                candidates = [o for o in candidates if o.price >= order.price]
                candidates.sort(key=lambda o: (-o.price, o.arrival, o.id))
            if not candidates:
                break
            best = candidates[0]
            fill = min(remaining, best.qty)
            trades.append(Trade(best.price, fill, best.id, order.id,
                                best.agent_id, order.agent_id, order.side))
            remaining -= fill
            best.qty -= fill
            if best.qty <= 0:
                self.resting.remove(best)

        rested = None
        self_cancelled = []
        if remaining > 0 and not is_market:
            def _crosses(o: Order) -> bool:
                if o.side != opp_side or o.agent_id != order.agent_id:
                    return False
                return o.price <= order.price if order.side == "bid" else o.price >= order.price

            self_cancelled = [o for o in self.resting if _crosses(o)]
            for own in self_cancelled:
                self.resting.remove(own)
            rested = Order(order.id, order.side, order.price, remaining,
                           order.agent_id, order.arrival)
            self.resting.append(rested)
        return trades, rested, self_cancelled
