"""Epistemic/aleatoric uncertainty indices and normalization schemes.

Sub-indices are min-max normalized to [0, 1] under one of three schemes
(full sample, expanding with a 30-day burn-in, trailing 90-day window) and
combined as weighted sums with weights renormalized per day over the sources
actually present (a missing auxiliary day makes that source absent for the
day; nothing is interpolated).

Two combination modes exist for the total: ``linear`` (epi + ale, the default,
matching the reported component means summing to the reported total) and
``quadratic`` (sqrt(epi^2 + ale^2)). The discrepancy between the two
conventions is surfaced in the output metadata rather than silently resolved.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from .errors import ConfigurationError, DegenerateError, EmptySampleError
from .market_data import AUX_COLUMNS
from .regimes import RegimeThresholds, classify

NORMALIZATION_SCHEMES = ("full_sample", "expanding", "rolling90")
COMBINE_MODES = ("linear", "quadratic")
EXPANDING_BURN_IN = 30
ROLLING_WINDOW = 90
ROLLING_MIN_PERIODS = 30


@dataclass(frozen=True)
class UncertaintyWeights:
    """Weights on the epistemic and aleatoric simplices.

    Epistemic: regulatory-opacity proxy, data availability, MC variance
    (micro layer; excluded from the macro pipeline, its weight redistributes
    over the present sources). Aleatoric: implied vol, VIX, peg deviation,
    sentiment entropy.
    """

    w_regulatory: float = 0.3
    w_data: float = 0.2
    w_mc: float = 0.5
    w_dvol: float = 0.35
    w_vix: float = 0.15
    w_peg: float = 0.25
    w_entropy: float = 0.25

    def __post_init__(self):
        epi = (self.w_regulatory, self.w_data, self.w_mc)
        ale = (self.w_dvol, self.w_vix, self.w_peg, self.w_entropy)
        if any(w < 0 for w in epi + ale):
            raise ConfigurationError("uncertainty weights must be nonnegative")
        for name, group in (("epistemic", epi), ("aleatoric", ale)):
            if abs(sum(group) - 1.0) > 1e-9:
                raise ConfigurationError(f"{name} weights sum to {sum(group)}, expected 1")

    @property
    def epistemic(self) -> dict:
        return {"reg": self.w_regulatory, "data": self.w_data, "mc": self.w_mc}

    @property
    def aleatoric(self) -> dict:
        return {"dvol": self.w_dvol, "vix": self.w_vix, "peg": self.w_peg, "entropy": self.w_entropy}


# ---------------------------------------------------------------------------
# Entropy
# ---------------------------------------------------------------------------

def shannon_entropy(fg_window, thresholds: RegimeThresholds = RegimeThresholds()) -> float:
    """Shannon entropy of the regime histogram of a fear/greed window."""
    vals = np.asarray(fg_window, dtype=float)
    if vals.size == 0:
        raise EmptySampleError("entropy window is empty")
    regs = classify(vals, thresholds)
    codes = np.array([int(r) for r in np.atleast_1d(regs)])
    counts = np.bincount(codes, minlength=5).astype(float)
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def rolling_entropy(fg: pd.Series, window: int = 30,
                    thresholds: RegimeThresholds = RegimeThresholds()) -> pd.Series:
    """Trailing-window regime entropy; NaN until the window is full."""
    vals = fg.values.astype(float)
    out = np.full(len(vals), np.nan)
    for t in range(window - 1, len(vals)):
        out[t] = shannon_entropy(vals[t - window + 1:t + 1], thresholds)
    return pd.Series(out, index=fg.index, name="entropy")


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------

def normalize(series, scheme: str = "full_sample") -> pd.Series:
    """Min-max normalize a series to [0, 1] under the given scheme.

    ``full_sample`` uses the global min/max; ``expanding`` uses only data
    strictly before t (first 30 observations excluded, values clipped to
    [0, 1]); ``rolling90`` uses the trailing 90-day window including t.
    An identically-zero series maps to zeros; any other constant series
    raises, since min-max has no scale to work with.
    """
    s = pd.Series(series).astype(float)
    if scheme not in NORMALIZATION_SCHEMES:
        raise ConfigurationError(f"unknown normalization scheme {scheme!r}")
    valid = s.dropna()
    if len(valid) < 2:
        raise DegenerateError("normalization needs at least 2 observations")
    if float(valid.max()) == float(valid.min()):
        if float(valid.max()) == 0.0:
            return s * 0.0
        raise DegenerateError("constant series cannot be min-max normalized")

    if scheme == "full_sample":
        lo, hi = float(valid.min()), float(valid.max())
        return (s - lo) / (hi - lo)

    if scheme == "expanding":
        lo = s.expanding().min().shift(1)
        hi = s.expanding().max().shift(1)
        rng = hi - lo
        out = (s - lo) / rng.where(rng > 0)
        out = out.clip(0.0, 1.0)
        out.iloc[:EXPANDING_BURN_IN] = np.nan
        return out

    lo = s.rolling(ROLLING_WINDOW, min_periods=ROLLING_MIN_PERIODS).min()
    hi = s.rolling(ROLLING_WINDOW, min_periods=ROLLING_MIN_PERIODS).max()
    rng = hi - lo
    return (s - lo) / rng.where(rng > 0)


# ---------------------------------------------------------------------------
# Index construction
# ---------------------------------------------------------------------------

def _weighted_present(sources: dict, weights: dict, index: pd.Index) -> pd.Series:
    """Per-day weighted sum with weights renormalized over present sources."""
    names = [k for k, v in sources.items() if v is not None]
    if not names:
        raise ConfigurationError("no sources present for index")
    vals = np.column_stack([pd.Series(sources[k]).reindex(index).values for k in names])
    w = np.array([weights[k] for k in names], dtype=float)
    if w.sum() <= 0:
        raise ConfigurationError("all active weights are zero")
    present = ~np.isnan(vals)
    w_mat = np.where(present, w, 0.0)
    denom = w_mat.sum(axis=1)
    num = np.nansum(vals * w_mat, axis=1)
    out = np.where(denom > 0, num / np.where(denom > 0, denom, 1.0), np.nan)
    return pd.Series(out, index=index)


def data_availability_index(frame: pd.DataFrame, expected: Optional[list] = None) -> pd.Series:
    """sigma_data = 1 - available/expected auxiliary sources, per day."""
    expected = expected if expected is not None else AUX_COLUMNS
    cols = [c for c in expected if c in frame.columns]
    if not cols:
        return pd.Series(1.0, index=frame.index)
    available = frame[cols].notna().sum(axis=1)
    return 1.0 - available / len(expected)


def epistemic_index(sources: dict, weights: UncertaintyWeights | dict,
                    index: pd.Index) -> pd.Series:
    """Weighted epistemic index over {reg, data, mc}; absent sources drop out."""
    w = weights.epistemic if isinstance(weights, UncertaintyWeights) else dict(weights)
    return _weighted_present(sources, w, index).rename("sig_epi")


def aleatoric_index(sources: dict, weights: UncertaintyWeights | dict,
                    index: pd.Index) -> pd.Series:
    """Weighted aleatoric index over {dvol, vix, peg, entropy}."""
    w = weights.aleatoric if isinstance(weights, UncertaintyWeights) else dict(weights)
    return _weighted_present(sources, w, index).rename("sig_ale")


def total_uncertainty(sig_epi: pd.Series, sig_ale: pd.Series, mode: str = "linear") -> pd.Series:
    """Combine components: linear epi+ale (default) or quadratic rms."""
    if mode not in COMBINE_MODES:
        raise ConfigurationError(f"unknown combine mode {mode!r}")
    if len(sig_epi) != len(sig_ale):
        raise ConfigurationError("component series lengths disagree")
    if mode == "linear":
        out = sig_epi + sig_ale
    else:
        out = np.sqrt(sig_epi ** 2 + sig_ale ** 2)
    return out.rename("sig_total")


def volatility_proxy_uncertainty(park_vol: pd.Series, scheme: str = "full_sample") -> pd.Series:
    """Normalized range volatility standing in for the total index.

    Used when no auxiliary component CSVs are supplied; flagged as proxy mode
    in metadata by the caller.
    """
    return normalize(park_vol, scheme).rename("sig_total")


@dataclass
class UncertaintyComponents:
    """Per-day component and index columns plus construction metadata."""

    frame: pd.DataFrame           # sig_reg sig_data sig_dvol sig_vix sig_peg entropy sig_epi sig_ale sig_total
    combine_mode: str
    normalization: str
    proxy_mode: bool
    notes: dict = field(default_factory=dict)


def build_uncertainty(frame: pd.DataFrame, *, weights: UncertaintyWeights = UncertaintyWeights(),
                      combine_mode: str = "linear", scheme: str = "full_sample",
                      entropy_window: int = 30,
                      thresholds: RegimeThresholds = RegimeThresholds(),
                      park_vol: Optional[pd.Series] = None) -> UncertaintyComponents:
    """Assemble the full uncertainty table from an aligned feature frame.

    Component mode requires at least one auxiliary column with data; without
    any, the caller should use :func:`volatility_proxy_uncertainty` instead
    (see :func:`build_uncertainty_auto`).
    """
    idx = frame.index
    out = pd.DataFrame(index=idx)

    entropy = rolling_entropy(frame["fg_value"], window=entropy_window, thresholds=thresholds)
    out["entropy"] = entropy

    def _norm_or_none(raw: Optional[pd.Series]):
        if raw is None or raw.dropna().empty:
            return None
        return normalize(raw, scheme)

    sig_reg = _norm_or_none(frame["xdisp"] if "xdisp" in frame.columns else None)
    sig_dvol = _norm_or_none(frame["dvol"] if "dvol" in frame.columns else None)
    sig_vix = _norm_or_none(frame["vix"] if "vix" in frame.columns else None)
    peg_raw = (frame["stable_px"] - 1.0).abs() if "stable_px" in frame.columns else None
    if peg_raw is not None and peg_raw.dropna().empty:
        peg_raw = None
    sig_peg = normalize(peg_raw, scheme) if peg_raw is not None else None
    sig_entropy = _norm_or_none(entropy)
    sig_data = data_availability_index(frame)

    out["sig_reg"] = sig_reg
    out["sig_data"] = sig_data
    out["sig_dvol"] = sig_dvol
    out["sig_vix"] = sig_vix
    out["sig_peg"] = sig_peg

    epi = epistemic_index({"reg": sig_reg, "data": sig_data, "mc": None}, weights, idx)
    ale = aleatoric_index(
        {"dvol": sig_dvol, "vix": sig_vix, "peg": sig_peg, "entropy": sig_entropy},
        weights, idx,
    )
    out["sig_epi"] = epi
    out["sig_ale"] = ale
    out["sig_total"] = total_uncertainty(epi, ale, combine_mode)

    notes = {"combine_mode_discrepancy": (
        "component means add linearly under the default mode; the quadratic "
        "variance-style combination is available via combine_mode='quadratic'"
    )}
    return UncertaintyComponents(out, combine_mode, scheme, proxy_mode=False, notes=notes)


def build_uncertainty_auto(frame: pd.DataFrame, park_vol: pd.Series, *,
                           weights: UncertaintyWeights = UncertaintyWeights(),
                           combine_mode: str = "linear", scheme: str = "full_sample",
                           entropy_window: int = 30,
                           thresholds: RegimeThresholds = RegimeThresholds()) -> UncertaintyComponents:
    """Component mode when any auxiliary data exist, else volatility proxy."""
    has_aux = any(c in frame.columns and frame[c].notna().any() for c in AUX_COLUMNS)
    if has_aux:
        return build_uncertainty(frame, weights=weights, combine_mode=combine_mode,
                                 scheme=scheme, entropy_window=entropy_window,
                                 thresholds=thresholds)
    out = pd.DataFrame(index=frame.index)
    out["entropy"] = rolling_entropy(frame["fg_value"], window=entropy_window, thresholds=thresholds)
    out["sig_reg"] = np.nan
    out["sig_data"] = data_availability_index(frame)
    out["sig_dvol"] = np.nan
    out["sig_vix"] = np.nan
    out["sig_peg"] = np.nan
    out["sig_epi"] = np.nan
    out["sig_ale"] = np.nan
    out["sig_total"] = volatility_proxy_uncertainty(park_vol, scheme)
    return UncertaintyComponents(out, combine_mode, scheme, proxy_mode=True,
                                 notes={"proxy": "normalized range volatility"})
