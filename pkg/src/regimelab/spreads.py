"""Bid-ask spread estimators and volatility proxies from daily OHLC bars.

All estimators operate on log price ratios, so they are invariant to a
uniform rescaling of prices and ignore volume entirely. Spreads are relative
(fractions of price); multiply by 1e4 for basis points. Negative estimates
are floored at zero per standard practice and the flooring count is kept.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import pandas as pd

from .errors import InsufficientDataError
from .market_data import AlignedSeries

_CS_DEN = 3.0 - 2.0 * np.sqrt(2.0)


def _ohlc_frame(bars) -> pd.DataFrame:
    if isinstance(bars, AlignedSeries):
        return bars.frame
    if isinstance(bars, pd.DataFrame):
        return bars
    idx = pd.DatetimeIndex([pd.Timestamp(b.date) for b in bars])
    return pd.DataFrame(
        {"open": [b.open for b in bars], "high": [b.high for b in bars],
         "low": [b.low for b in bars], "close": [b.close for b in bars]},
        index=idx,
    )


class FlooredSeries(NamedTuple):
    values: pd.Series
    n_floored: int


@dataclass
class SpreadSeries:
    """Date-keyed spread estimates; all stored values are >= 0."""

    cs_spread: pd.Series
    roll_spread: pd.Series
    ar_spread: pd.Series
    negative_count: int


@dataclass
class VolSeries:
    """Date-keyed volatility proxies; all values >= 0."""

    parkinson_vol: pd.Series
    realized_vol: pd.Series
    range_vol: pd.Series


def corwin_schultz(bars) -> FlooredSeries:
    """High-low spread estimator from overlapping 2-day ranges.

    For each day pair (t-1, t):
        beta  = ln(H_{t-1}/L_{t-1})^2 + ln(H_t/L_t)^2
        gamma = ln(max(H)/min(L))^2 over the two days
        alpha = (sqrt(2 beta) - sqrt(beta)) / (3 - 2 sqrt 2)
                - sqrt(gamma / (3 - 2 sqrt 2))
        S     = 2 (e^alpha - 1) / (1 + e^alpha)

    The estimate is assigned to the second day; day one is NaN. Negative
    spreads are floored to zero and counted.
    """
    f = _ohlc_frame(bars)
    if len(f) < 2:
        raise InsufficientDataError("corwin-schultz needs at least 2 bars")
    h, lo = np.log(f["high"].values), np.log(f["low"].values)
    hl2 = (h - lo) ** 2
    beta = hl2[:-1] + hl2[1:]
    pair_high = np.maximum(h[:-1], h[1:])
    pair_low = np.minimum(lo[:-1], lo[1:])
    gamma = (pair_high - pair_low) ** 2
    alpha = (np.sqrt(2.0 * beta) - np.sqrt(beta)) / _CS_DEN - np.sqrt(gamma / _CS_DEN)
    spread = 2.0 * (np.exp(alpha) - 1.0) / (1.0 + np.exp(alpha))
    n_floored = int((spread < 0).sum())
    spread = np.maximum(spread, 0.0)
    out = pd.Series(np.concatenate([[np.nan], spread]), index=f.index, name="cs_spread")
    return FlooredSeries(out, n_floored)


def _sliding(a: np.ndarray, w: int) -> np.ndarray:
    return np.lib.stride_tricks.sliding_window_view(a, w)


def roll_spread(returns: pd.Series, window: int = 21) -> pd.Series:
    """Roll measure: 2 sqrt(-cov(r_t, r_{t-1})) per window, zero otherwise.

    The covariance at day t is the two-pass sample covariance (ddof=1) of the
    ``window - 1`` consecutive return pairs inside the trailing window of
    ``window`` returns.
    """
    if window < 3:
        raise ValueError("roll window must be >= 3")
    r = pd.Series(returns).astype(float)
    vals = r.values
    n = len(vals)
    if n < window:
        raise InsufficientDataError(f"roll window {window} longer than series of {n}")
    x = _sliding(vals[1:], window - 1)      # r_t ... pairs' second element
    y = _sliding(vals[:-1], window - 1)     # r_{t-1}
    xm = x - x.mean(axis=1, keepdims=True)
    ym = y - y.mean(axis=1, keepdims=True)
    cov = (xm * ym).sum(axis=1) / (window - 2)
    out = np.full(n, np.nan)
    spread = np.where(cov < 0, 2.0 * np.sqrt(np.where(cov < 0, -cov, 0.0)), 0.0)
    # any NaN return inside the window span keeps the output NaN
    has_nan = _sliding(np.isnan(vals), window).any(axis=1)
    spread[has_nan] = np.nan
    out[window - 1:] = spread
    return pd.Series(out, index=r.index, name="roll_spread")


def abdi_ranaldo(bars, window: int = 21) -> FlooredSeries:
    """Close-to-midpoint spread estimator on log prices.

    Daily squared spread s2_t = 4 (c_t - m_t)(c_t - c_{t-1}) with
    m_t = (h_t + l_t)/2 in logs; the estimate at t is sqrt of the window
    mean of s2, with negative means floored to zero before the root.
    """
    f = _ohlc_frame(bars)
    if len(f) < 2:
        raise InsufficientDataError("abdi-ranaldo needs at least 2 bars")
    c = np.log(f["close"].values)
    m = 0.5 * (np.log(f["high"].values) + np.log(f["low"].values))
    s2 = np.full(len(f), np.nan)
    s2[1:] = 4.0 * (c[1:] - m[1:]) * (c[1:] - c[:-1])
    daily = pd.Series(s2, index=f.index)
    mean_s2 = daily.rolling(window).mean()
    n_floored = int((mean_s2 < 0).sum())
    spread = np.sqrt(mean_s2.clip(lower=0.0))
    spread.name = "ar_spread"
    return FlooredSeries(spread, n_floored)


def parkinson_volatility(bars, window: int = 25) -> pd.Series:
    """Range-based daily volatility: sqrt(mean(ln(H/L)^2) / (4 ln 2)).

    Window default 25 keeps the volatility control's leading gap consistent
    with the rest of the lag-drop bookkeeping.
    """
    if window < 1:
        raise ValueError("parkinson window must be >= 1")
    f = _ohlc_frame(bars)
    hl2 = np.log(f["high"] / f["low"]) ** 2
    out = np.sqrt(hl2.rolling(window).mean() / (4.0 * np.log(2.0)))
    out.name = "park_vol"
    return out


def realized_volatility(returns: pd.Series, window: int = 30) -> pd.Series:
    """Rolling sample standard deviation (ddof=1) of daily log returns."""
    if window < 2:
        raise ValueError("realized-vol window must be >= 2")
    r = pd.Series(returns).astype(float)
    if r.notna().sum() < window:
        raise InsufficientDataError(f"realized-vol window {window} longer than series")
    out = r.rolling(window).std(ddof=1)
    out.name = "rv"
    return out


def range_volatility(bars) -> pd.Series:
    """Daily log range ln(H/L)."""
    f = _ohlc_frame(bars)
    out = np.log(f["high"] / f["low"])
    out.name = "range_vol"
    return out


def build_spread_series(bars, returns: pd.Series, *, roll_window: int = 21,
                        ar_window: int = 21) -> SpreadSeries:
    cs = corwin_schultz(bars)
    ar = abdi_ranaldo(bars, window=ar_window)
    roll = roll_spread(returns, window=roll_window)
    return SpreadSeries(cs.values, roll, ar.values, cs.n_floored)


def build_vol_series(bars, returns: pd.Series, *, park_window: int = 25,
                     rv_window: int = 30) -> VolSeries:
    return VolSeries(
        parkinson_volatility(bars, window=park_window),
        realized_volatility(returns, window=rv_window),
        range_volatility(bars),
    )
