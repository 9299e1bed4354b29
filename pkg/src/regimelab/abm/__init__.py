"""Order-book market simulator with uncertainty-aware market making."""

from .book import Order, OrderBook, Trade, match, NaiveBook
from .agents import (
    ArbParams,
    InformedParams,
    MarketMakerParams,
    NoiseParams,
    arb_action,
    informed_action,
    mm_quotes,
    noise_action,
)
from .session import (
    SessionConfig,
    SessionResult,
    ablation_sweep,
    run_session,
    session_preset,
)

__all__ = [
    "Order", "OrderBook", "Trade", "match", "NaiveBook",
    "ArbParams", "InformedParams", "MarketMakerParams", "NoiseParams",
    "arb_action", "informed_action", "mm_quotes", "noise_action",
    "SessionConfig", "SessionResult", "ablation_sweep", "run_session", "session_preset",
]
