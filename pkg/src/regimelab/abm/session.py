"""Seeded multi-agent trading sessions over a daily feature series.

Each feature row supplies one day's sentiment score, epistemic uncertainty,
total uncertainty, and volatility. A day runs a fixed number of intra-day
steps; at every step the agents act in a freshly shuffled order:

  * market makers cancel and repost quotes around a shared anchor price,
  * informed traders fire a market order when the sentiment signal clears
    the threshold and epistemic uncertainty is acceptable,
  * noise traders arrive Poisson with a sentiment-tilted coin,
  * the arbitrageur trades toward a latent fair value that random-walks
    with the day's feature volatility.

The anchor adapts to signed taker flow (a linear price-impact rule in the
Kyle / Glosten-Milgrom spirit): sustained buying marks quotes up until the
arbitrageur's edge disappears, which is what lets the mid track the latent
fair value without order-book sweep cascades.

The whole session consumes a single seeded generator in a fixed call order,
and no agent decision changes the *number* of random draws, so two sessions
with the same seed but different market-maker parameters share their random
numbers step for step (common random numbers across parameter sweeps).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import pandas as pd

from ..errors import ConfigurationError, EmptySampleError, RegimelabError
from ..smm import acf, excess_kurtosis
from .agents import (ArbParams, InformedParams, MarketMakerParams, NoiseParams,
                     arb_action, informed_action, mm_quotes, noise_action)
from .book import Order, OrderBook, match

P0 = 10_000.0           # session starting price, quote units
TICK = 0.01             # minimum increment for non-quote prices


@dataclass(frozen=True)
class SessionConfig:
    preset: str = "recalibrated"
    n_mm: int = 5
    n_informed: int = 5
    n_noise: int = 15
    n_arb: int = 1
    steps_per_day: int = 100
    p0: float = P0
    mm: MarketMakerParams = field(default_factory=MarketMakerParams)
    informed: InformedParams = field(default_factory=InformedParams)
    noise: NoiseParams = field(default_factory=NoiseParams)
    arb: ArbParams = field(default_factory=ArbParams)
    impact: float = 0.15         # anchor move per unit of net taker flow
    check_invariants: bool = True

    def __post_init__(self):
        if min(self.n_mm, self.steps_per_day) < 1 or min(self.n_informed, self.n_noise, self.n_arb) < 0:
            raise ConfigurationError("need at least one market maker and one step per day")
        if self.p0 <= 0 or self.impact < 0:
            raise ConfigurationError("p0 must be positive and impact nonnegative")


def session_preset(name: str, **overrides) -> SessionConfig:
    """Named calibrations: 'initial' (3 MMs, 15 bps base) and
    'recalibrated' (5 MMs, 7 bps base, livelier noise flow)."""
    bps = P0 * 1e-4
    if name == "initial":
        cfg = SessionConfig(preset="initial", n_mm=3,
                            mm=MarketMakerParams(s_base=15.0 * bps, gamma=0.001,
                                                 delta=1.5, quote_size=8.0),
                            noise=NoiseParams(lam=0.5, beta=0.1, size_mean=0.6))
    elif name == "recalibrated":
        cfg = SessionConfig(preset="recalibrated", n_mm=5,
                            mm=MarketMakerParams(s_base=7.0 * bps, gamma=0.001,
                                                 delta=1.5, quote_size=8.0),
                            noise=NoiseParams(lam=1.2, beta=0.1, size_mean=0.6))
    else:
        raise ConfigurationError(f"unknown preset {name!r}")
    return replace(cfg, **overrides) if overrides else cfg


REQUIRED_FEATURES = ["s", "sig_epi", "sig_total", "vol"]


def synthetic_features(n_days: int, seed: int = 7) -> pd.DataFrame:
    """Regime-switching feature series for simulation tests and demos.

    Volatility alternates between a calm and a stressed state; sentiment is
    a persistent AR(1) in [-1, 1]; total uncertainty loads on the volatility
    state and sentiment extremity with idiosyncratic noise.
    """
    rng = np.random.default_rng(seed)
    vol_states = (0.008, 0.045)
    switch_prob = (0.03, 0.07)      # calm state is stickier than stress
    state = 0
    vol = np.empty(n_days)
    s = np.empty(n_days)
    s_val = 0.0
    for t in range(n_days):
        if rng.random() < switch_prob[state]:
            state = 1 - state
        vol[t] = vol_states[state]
        s_val = np.clip(0.97 * s_val + rng.normal(0.0, 0.12), -1.0, 1.0)
        s[t] = s_val
    sig_total = np.clip(0.20 + 0.45 * (vol - vol.min()) / np.ptp(vol)
                        + 0.25 * np.abs(s) + rng.normal(0.0, 0.05, n_days), 0.0, 1.0)
    sig_epi = np.clip(0.30 + 0.15 * rng.standard_normal(n_days), 0.0, 1.0)
    idx = pd.date_range("2024-01-01", periods=n_days, freq="D")
    return pd.DataFrame({"s": s, "sig_epi": sig_epi, "sig_total": sig_total, "vol": vol},
                        index=idx)


@dataclass
class _AgentState:
    cash: float = 0.0
    inv: float = 0.0
    escrow_cash: float = 0.0
    escrow_base: float = 0.0


@dataclass
class SessionResult:
    """Step log (source of truth), daily aggregates, and summary stats."""

    steps: pd.DataFrame
    daily: pd.DataFrame
    summary: dict
    config: SessionConfig
    seed: int
    n_trades: int
    quote_identity_error: float
    conservation: dict

    def recompute_daily(self) -> pd.DataFrame:
        """Re-derive the daily table from the step log (for verification)."""
        g = self.steps.groupby("day")
        daily = pd.DataFrame({
            "close_mid": g["mid"].last(),
            "spread_bps": g["spread_bps"].mean(),
            "volume": g["volume"].sum(),
            "n_trades": g["n_trades"].sum(),
        })
        daily["ret"] = np.log(daily["close_mid"] / daily["close_mid"].shift(1))
        return daily


class _Session:
    def __init__(self, features: pd.DataFrame, config: SessionConfig, seed: int):
        missing = [c for c in REQUIRED_FEATURES if c not in features.columns]
        if missing:
            raise ConfigurationError(f"feature series missing columns {missing}")
        if len(features) == 0:
            raise EmptySampleError("empty feature series")
        self.features = features
        self.cfg = config
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.book = OrderBook()
        self.last_mid = config.p0
        self.anchor = config.p0
        self.p_fair = config.p0
        self.step_net_flow = 0.0
        self.next_order_id = 0
        self.seq = 0

        c = config
        self.mm_ids = list(range(c.n_mm))
        self.informed_ids = list(range(c.n_mm, c.n_mm + c.n_informed))
        self.noise_ids = list(range(c.n_mm + c.n_informed, c.n_mm + c.n_informed + c.n_noise))
        self.arb_ids = list(range(c.n_mm + c.n_informed + c.n_noise,
                                  c.n_mm + c.n_informed + c.n_noise + c.n_arb))
        n_agents = c.n_mm + c.n_informed + c.n_noise + c.n_arb
        self.agents = [_AgentState() for _ in range(n_agents)]
        self.mm_live: dict = {i: [] for i in self.mm_ids}
        self.quote_identity_error = 0.0
        self.n_trades = 0
        self.step_volume = 0.0
        self.step_trades = 0
        self.total_volume = 0.0

    # -- plumbing -----------------------------------------------------------

    def _new_order(self, side, price, qty, agent_id, step) -> Order:
        self.next_order_id += 1
        self.seq += 1
        return Order(self.next_order_id, side, price, qty, agent_id, (step, self.seq))

    def _settle(self, trade) -> None:
        maker = self.agents[trade.maker_agent]
        taker = self.agents[trade.taker_agent]
        value = trade.price * trade.qty
        if trade.taker_side == "bid":       # taker buys, maker's resting ask sells
            taker.cash -= value
            taker.inv += trade.qty
            maker.escrow_base -= trade.qty
            maker.cash += value
        else:                               # taker sells into the maker's bid
            taker.inv -= trade.qty
            taker.cash += value
            maker.escrow_cash -= value
            maker.inv += trade.qty
        self.n_trades += 1
        self.step_trades += 1
        self.step_volume += trade.qty
        self.total_volume += trade.qty
        self.step_net_flow += trade.qty if trade.taker_side == 'bid' else -trade.qty

    def _refund(self, order: Order) -> None:
        agent = self.agents[order.agent_id]
        if order.side == "bid":
            agent.escrow_cash -= order.price * order.qty
            agent.cash += order.price * order.qty
        else:
            agent.escrow_base -= order.qty
            agent.inv += order.qty

    def _escrow(self, order: Order) -> None:
        agent = self.agents[order.agent_id]
        if order.side == "bid":
            agent.escrow_cash += order.price * order.qty
            agent.cash -= order.price * order.qty
        else:
            agent.escrow_base += order.qty
            agent.inv -= order.qty

    def _submit(self, order: Order):
        trades, rested, self_cancelled = match(self.book, order)
        for culled in self_cancelled:
            self._refund(culled)
            if culled.agent_id in self.mm_live:
                self.mm_live[culled.agent_id] = [
                    o for o in self.mm_live[culled.agent_id] if o.id != culled.id]
        for tr in trades:
            self._settle(tr)
        if rested is not None:
            self._escrow(rested)
        mid = self.book.mid()
        if mid is not None:
            self.last_mid = mid
        elif trades:
            self.last_mid = trades[-1].price
        if self.cfg.check_invariants and self.book.is_crossed():
            raise RegimelabError("order book crossed after matching")
        return trades, rested

    # -- agent activations ---------------------------------------------------

    def _act_mm(self, agent_id: int, day, step: int, anchor: float) -> None:
        for live in self.mm_live[agent_id]:
            popped = self.book.cancel(live.id)
            if popped is not None:
                self._refund(popped)
        self.mm_live[agent_id] = []

        inv = self.agents[agent_id].inv
        bid, ask = mm_quotes(anchor, inv, day.sig_total, self.cfg.mm)
        ident = abs((ask - bid) - (self.cfg.mm.s_base + 2.0 * self.cfg.mm.delta * day.sig_total))
        self.quote_identity_error = max(self.quote_identity_error, ident)
        if bid <= 0:
            return
        for side, price in (("ask", ask), ("bid", bid)):
            order = self._new_order(side, price, self.cfg.mm.quote_size, agent_id, step)
            _, rested = self._submit(order)
            if rested is not None:
                self.mm_live[agent_id].append(rested)

    def _act_informed(self, agent_id: int, day, step: int) -> None:
        gate = self.rng.random()
        if gate >= self.cfg.informed.act_prob:
            return
        sig_epi = day.sig_epi if np.isfinite(day.sig_epi) else day.sig_total
        action = informed_action(day.s, sig_epi, self.cfg.informed)
        if action == "hold":
            return
        side = "bid" if action == "buy" else "ask"
        self._submit(self._new_order(side, None, self.cfg.informed.volume, agent_id, step))

    def _act_noise(self, agent_id: int, day, step: int) -> None:
        arrivals = self.rng.poisson(self.cfg.noise.lam)
        for _ in range(arrivals):
            direction, size = noise_action(day.s, self.rng, self.cfg.noise)
            side = "bid" if direction == "buy" else "ask"
            self._submit(self._new_order(side, None, size, agent_id, step))

    def _act_arb(self, agent_id: int, day, step: int) -> None:
        action = arb_action(self.last_mid, self.p_fair, self.cfg.arb.epsilon)
        if action == "hold":
            return
        gap = abs(self.last_mid - self.p_fair)
        mult = min(self.cfg.arb.max_multiple, max(1, int(gap / self.cfg.arb.epsilon)))
        side = "bid" if action == "buy" else "ask"
        self._submit(self._new_order(side, None, self.cfg.arb.size * mult, agent_id, step))

    # -- main loop ------------------------------------------------------------

    def run(self) -> SessionResult:
        cfg = self.cfg
        n_agents = len(self.agents)
        total_cash0 = sum(a.cash + a.escrow_cash for a in self.agents)
        total_base0 = sum(a.inv + a.escrow_base for a in self.agents)

        step_rows = {k: [] for k in ("day", "step", "best_bid", "best_ask", "mid",
                                     "spread_bps", "n_trades", "volume")}
        daily_rows = []

        for d, (ts, day) in enumerate(self.features.iterrows()):
            z = self.rng.standard_normal()
            self.p_fair *= float(np.exp(cfg.arb.fair_vol_scale * day.vol * z))

            flow_ids = np.array(self.informed_ids + self.noise_ids + self.arb_ids)
            for step in range(cfg.steps_per_day):
                self.step_volume = 0.0
                self.step_trades = 0

                # quote phase: the anchor absorbs last step's net taker
                # flow, then makers refresh in random order around it and the
                # book is sampled while quotes are coherent
                self.anchor += cfg.impact * self.step_net_flow
                self.step_net_flow = 0.0
                for ai in self.rng.permutation(len(self.mm_ids)):
                    self._act_mm(self.mm_ids[int(ai)], day, step, self.anchor)
                bb, ba = self.book.best_bid(), self.book.best_ask()
                # half-spread in bps of the session reference price, so the
                # uncertainty channel is not confounded by the price level
                spread_bps = (0.5 * (ba - bb) / cfg.p0 * 1e4) \
                    if (bb is not None and ba is not None) else np.nan

                # flow phase: takers act in random order against fresh quotes
                for ai in self.rng.permutation(len(flow_ids)):
                    ai = int(flow_ids[int(ai)])
                    if ai in self.informed_ids:
                        self._act_informed(ai, day, step)
                    elif ai in self.noise_ids:
                        self._act_noise(ai, day, step)
                    else:
                        self._act_arb(ai, day, step)

                step_rows["day"].append(d)
                step_rows["step"].append(step)
                step_rows["best_bid"].append(bb if bb is not None else np.nan)
                step_rows["best_ask"].append(ba if ba is not None else np.nan)
                step_rows["mid"].append(self.last_mid)
                step_rows["spread_bps"].append(spread_bps)
                step_rows["n_trades"].append(self.step_trades)
                step_rows["volume"].append(self.step_volume)

            if cfg.check_invariants:
                cash_now = sum(a.cash + a.escrow_cash for a in self.agents)
                base_now = sum(a.inv + a.escrow_base for a in self.agents)
                churn = max(1.0, self.total_volume)
                if abs(cash_now - total_cash0) > 1e-9 * churn * cfg.p0 + 1e-3:
                    raise RegimelabError(f"cash not conserved on day {d}: {cash_now} vs {total_cash0}")
                if abs(base_now - total_base0) > 1e-9 * churn + 1e-9:
                    raise RegimelabError(f"inventory not conserved on day {d}")

            start = d * cfg.steps_per_day
            day_spreads = np.array(step_rows["spread_bps"][start:start + cfg.steps_per_day])
            daily_rows.append({
                "date": ts, "close_mid": step_rows["mid"][start + cfg.steps_per_day - 1],
                "spread_bps": float(np.nanmean(day_spreads)) if np.isfinite(day_spreads).any() else np.nan,
                "volume": float(np.sum(step_rows["volume"][start:start + cfg.steps_per_day])),
                "n_trades": int(np.sum(step_rows["n_trades"][start:start + cfg.steps_per_day])),
                "sig_total": float(day.sig_total), "s": float(day.s), "p_fair": self.p_fair,
            })

        daily = pd.DataFrame(daily_rows).set_index("date")
        daily["ret"] = np.log(daily["close_mid"] / daily["close_mid"].shift(1))
        steps = pd.DataFrame(step_rows)

        rets = daily["ret"].dropna().values
        summary = {
            "n_days": len(daily),
            "mean_spread_bps": float(daily["spread_bps"].mean()),
            "ret_std": float(np.std(rets, ddof=1)) if len(rets) > 2 else np.nan,
            "excess_kurtosis": excess_kurtosis(rets) if len(rets) > 12 and np.std(rets) > 0 else np.nan,
            "absret_acf1": acf(np.abs(rets), 1) if len(rets) > 12 and np.std(rets) > 0 else np.nan,
            "corr_spread_sigma": _corr(daily["spread_bps"], daily["sig_total"]),
            "corr_spread_sentiment": _corr(daily["spread_bps"], daily["s"]),
            "total_volume": float(daily["volume"].sum()),
            "n_trades": self.n_trades,
        }
        conservation = {
            "cash_initial": total_cash0,
            "cash_final": sum(a.cash + a.escrow_cash for a in self.agents),
            "base_initial": total_base0,
            "base_final": sum(a.inv + a.escrow_base for a in self.agents),
        }
        return SessionResult(steps, daily, summary, cfg, self.seed, self.n_trades,
                             self.quote_identity_error, conservation)


def _corr(a: pd.Series, b: pd.Series) -> float:
    df = pd.DataFrame({"a": a, "b": b}).dropna()
    if len(df) < 3 or df["a"].std() == 0 or df["b"].std() == 0:
        return float("nan")
    return float(np.corrcoef(df["a"], df["b"])[0, 1])


def run_session(features: pd.DataFrame, config: SessionConfig, seed: int) -> SessionResult:
    """Run one deterministic session over the daily feature series."""
    return _Session(features, config, seed).run()


def ablation_sweep(features: pd.DataFrame, config: SessionConfig, deltas,
                   seed: int) -> dict:
    """Re-run the session across uncertainty sensitivities with one seed.

    Common random numbers: every delta value replays the identical shock
    stream, so spread differences are attributable to delta alone. Reports
    whether the mean spread is strictly increasing in delta.
    """
    deltas = list(deltas)
    if len(deltas) < 2:
        raise ConfigurationError("need at least 2 delta values")
    rows = []
    for d in deltas:
        cfg = replace(config, mm=replace(config.mm, delta=float(d)))
        res = run_session(features, cfg, seed)
        rows.append({"delta": float(d),
                     "mean_spread_bps": res.summary["mean_spread_bps"],
                     "corr_spread_sigma": res.summary["corr_spread_sigma"],
                     "ret_std": res.summary["ret_std"],
                     "n_trades": res.summary["n_trades"]})
    table = pd.DataFrame(rows)
    spreads = table["mean_spread_bps"].values
    return {"table": table,
            "monotone_increasing": bool(np.all(np.diff(spreads) > 0)),
            "seed": seed}
