"""Agent parameter sets and pure decision rules.

Market makers quote around the mid with an inventory shift and an
uncertainty-widened spread; informed traders act on the sentiment signal
only when epistemic uncertainty is low; noise traders arrive as a Poisson
stream with a weak sentiment tilt; arbitrageurs push the price toward a
latent fair value and ignore sentiment entirely.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError


@dataclass(frozen=True)
class MarketMakerParams:
    s_base: float = 7.0          # base quoted spread, price units
    gamma: float = 0.001         # inventory aversion, price units per unit held
    delta: float = 1.5           # uncertainty sensitivity, price units per index unit
    quote_size: float = 8.0

    def __post_init__(self):
        if self.s_base <= 0 or self.quote_size <= 0:
            raise ConfigurationError("market maker sizes and base spread must be positive")
        if self.gamma < 0 or self.delta < 0:
            raise ConfigurationError("gamma and delta must be nonnegative")


@dataclass(frozen=True)
class InformedParams:
    tau: float = 0.3             # sentiment threshold
    sigma_epi_max: float = 0.5   # maximum acceptable epistemic uncertainty
    volume: float = 2.0
    act_prob: float = 0.08       # per-step chance of being active

    def __post_init__(self):
        if not 0 < self.tau < 1:
            raise ConfigurationError("tau must lie in (0, 1)")
        if self.volume <= 0 or not 0 <= self.act_prob <= 1:
            raise ConfigurationError("invalid informed-trader parameters")


@dataclass(frozen=True)
class NoiseParams:
    lam: float = 0.8             # Poisson arrivals per trader per step
    beta: float = 0.1            # sentiment tilt on buy probability
    size_mean: float = 0.6

    def __post_init__(self):
        if self.lam < 0 or self.size_mean <= 0:
            raise ConfigurationError("noise arrival rate/size must be positive")
        if not 0 <= self.beta < 0.5:
            raise ConfigurationError("beta must lie in [0, 0.5)")


@dataclass(frozen=True)
class ArbParams:
    epsilon: float = 2.0         # no-trade band around fair value, price units
    size: float = 8.0
    fair_vol_scale: float = 1.0  # multiplies the day's feature volatility
    max_multiple: int = 12        # size scales with the mispricing, capped here

    def __post_init__(self):
        if self.epsilon <= 0 or self.size <= 0 or self.fair_vol_scale < 0 or self.max_multiple < 1:
            raise ConfigurationError("invalid arbitrageur parameters")


def mm_quotes(mid: float, inventory: float, sigma_total: float,
              params: MarketMakerParams) -> tuple[float, float]:
    """Bid/ask around the mid: both shift down with inventory, widen with
    uncertainty; the quoted spread is s_base + 2 delta sigma independent of
    inventory."""
    if mid <= 0:
        raise ConfigurationError(f"mid {mid} must be positive")
    shift = params.gamma * inventory
    half = 0.5 * params.s_base
    widen = params.delta * sigma_total
    bid = mid - half - shift - widen
    ask = mid + half - shift + widen
    return bid, ask


def informed_action(s_blend: float, sigma_epi: float, params: InformedParams) -> str:
    """'buy'/'sell' the configured volume when the signal is strong and
    epistemic uncertainty acceptable; otherwise 'hold'."""
    if sigma_epi < params.sigma_epi_max:
        if s_blend > params.tau:
            return "buy"
        if s_blend < -params.tau:
            return "sell"
    return "hold"


def noise_action(s_blend: float, rng: np.random.Generator,
                 params: NoiseParams) -> tuple[str, float]:
    """Direction ~ Bernoulli(0.5 + beta s) and an exponential size."""
    p_buy = 0.5 + params.beta * s_blend
    side = "buy" if rng.random() < p_buy else "sell"
    size = rng.exponential(params.size_mean) + 1e-6
    return side, size


def arb_action(price: float, p_fair: float, epsilon: float) -> str:
    """Buy below fair value minus the band, sell above it, else hold."""
    if price <= 0 or p_fair <= 0:
        raise ConfigurationError("prices must be positive")
    if price < p_fair - epsilon:
        return "buy"
    if price > p_fair + epsilon:
        return "sell"
    return "hold"
