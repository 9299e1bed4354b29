"""Sentiment scores, regime classification, and regime dynamics.

The Fear & Greed value (0..100) maps to a score in [-1, 1], a distance-
from-neutral extremity in [0, 1], and one of five ordered regimes. Threshold
boundaries: extreme fear strictly below ``ef_below``, a closed neutral band,
and extreme greed strictly above ``eg_above``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np
import pandas as pd

from .errors import EmptySampleError


class Regime(enum.IntEnum):
    """Five-level sentiment regime with total order fear -> greed."""

    EXTREME_FEAR = 0
    FEAR = 1
    NEUTRAL = 2
    GREED = 3
    EXTREME_GREED = 4

    @property
    def token(self) -> str:
        return self.name.lower()

    @classmethod
    def from_token(cls, token: str) -> "Regime":
        return cls[token.upper()]


REGIME_TOKENS = [r.token for r in Regime]
EXTREME_REGIMES = (Regime.EXTREME_FEAR, Regime.EXTREME_GREED)


@dataclass(frozen=True)
class RegimeThresholds:
    """Cutoffs for the five regimes; defaults are the standard 25/45/55/75."""

    ef_below: int = 25
    neutral_low: int = 45
    neutral_high: int = 55
    eg_above: int = 75

    def __post_init__(self):
        if not (0 < self.ef_below <= self.neutral_low <= self.neutral_high <= self.eg_above < 100):
            raise ValueError(f"invalid thresholds {self}")


def _check_fg(fg) -> np.ndarray:
    arr = np.asarray(fg, dtype=float)
    if np.any((arr < 0) | (arr > 100) | ~np.isfinite(arr)):
        raise ValueError("fear/greed values must lie in [0, 100]")
    return arr


def sentiment_score(fg) -> Union[float, np.ndarray]:
    """Normalized sentiment score s = (fg - 50) / 50 in [-1, 1]."""
    arr = _check_fg(fg)
    out = (arr - 50.0) / 50.0
    return float(out) if np.isscalar(fg) or out.ndim == 0 else out


def extremity(fg) -> Union[float, np.ndarray]:
    """Distance from neutral e = |fg - 50| / 50 in [0, 1]."""
    arr = _check_fg(fg)
    out = np.abs(arr - 50.0) / 50.0
    return float(out) if np.isscalar(fg) or out.ndim == 0 else out


def classify(fg, thresholds: RegimeThresholds = RegimeThresholds()) -> Union[Regime, np.ndarray]:
    """Map fear/greed value(s) to regimes.

    extreme_fear  iff fg < ef_below
    fear          iff ef_below <= fg < neutral_low
    neutral       iff neutral_low <= fg <= neutral_high
    greed         iff neutral_high < fg <= eg_above
    extreme_greed iff fg > eg_above
    """
    arr = _check_fg(fg)
    t = thresholds
    codes = np.select(
        [arr < t.ef_below, arr < t.neutral_low, arr <= t.neutral_high, arr <= t.eg_above],
        [Regime.EXTREME_FEAR, Regime.FEAR, Regime.NEUTRAL, Regime.GREED],
        default=Regime.EXTREME_GREED,
    )
    if np.isscalar(fg) or codes.ndim == 0:
        return Regime(int(codes))
    return np.array([Regime(int(c)) for c in codes], dtype=object)


def classify_series(fg: pd.Series, thresholds: RegimeThresholds = RegimeThresholds()) -> pd.Series:
    """Regime tokens for a pandas Series of fear/greed values."""
    regs = classify(fg.values, thresholds)
    return pd.Series([r.token for r in regs], index=fg.index, name="regime")


def regime_counts(regimes: Iterable) -> dict:
    """Day counts per regime token; missing regimes count zero."""
    counts = {tok: 0 for tok in REGIME_TOKENS}
    for r in regimes:
        tok = r.token if isinstance(r, Regime) else str(r)
        counts[tok] += 1
    return counts


@dataclass
class RegimeDynamics:
    """Transition counts, per-regime persistence, and mean run lengths."""

    transition_counts: pd.DataFrame      # 5x5, rows = from, cols = to
    persistence: dict                    # token -> diagonal share in [0, 1]
    mean_run_length: dict                # token -> mean contiguous run length
    n_days: int


def regime_dynamics(regimes: Sequence) -> RegimeDynamics:
    """Count day-to-day transitions and summarize persistence and runs."""
    seq = [r if isinstance(r, Regime) else Regime.from_token(str(r)) for r in regimes]
    if len(seq) < 2:
        raise EmptySampleError("regime dynamics need at least 2 days")

    counts = np.zeros((5, 5), dtype=int)
    for a, b in zip(seq[:-1], seq[1:]):
        counts[int(a), int(b)] += 1

    persistence = {}
    for r in Regime:
        row_total = counts[int(r)].sum()
        persistence[r.token] = float(counts[int(r), int(r)] / row_total) if row_total else float("nan")

    runs: dict = {tok: [] for tok in REGIME_TOKENS}
    current, length = seq[0], 1
    for r in seq[1:]:
        if r == current:
            length += 1
        else:
            runs[current.token].append(length)
            current, length = r, 1
    runs[current.token].append(length)
    mean_run = {tok: (float(np.mean(v)) if v else float("nan")) for tok, v in runs.items()}

    frame = pd.DataFrame(counts, index=REGIME_TOKENS, columns=REGIME_TOKENS)
    return RegimeDynamics(frame, persistence, mean_run, len(seq))


def regime_runs(regimes: Sequence) -> list[tuple[str, int, int]]:
    """Contiguous same-regime runs as (token, start_index, length)."""
    toks = [r.token if isinstance(r, Regime) else str(r) for r in regimes]
    out = []
    start = 0
    for i in range(1, len(toks) + 1):
        if i == len(toks) or toks[i] != toks[start]:
            out.append((toks[start], start, i - start))
            start = i
    return out
