"""Regime regressions, stratification, event studies, and the backtest.

These take the canonical feature frame (or explicit column series) and
return plain dataclasses/DataFrames ready for CSV export. Neutral is always
the omitted regression baseline; "extreme" pools extreme fear and extreme
greed.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd
from scipy import stats

from ..errors import DegenerateError, EmptySampleError, InsufficientDataError
from ..regimes import Regime
from .regression import RegressionResult, ols, ssr_f_test, wald_f_test
from .resampling import GapStats, gap_stats, holm_bonferroni

_EXTREME = [Regime.EXTREME_FEAR.token, Regime.EXTREME_GREED.token]
_NEUTRAL = Regime.NEUTRAL.token
_DUMMY_ORDER = [Regime.EXTREME_GREED.token, Regime.GREED.token,
                Regime.FEAR.token, Regime.EXTREME_FEAR.token]

ETF_WINDOW = (dt.date(2024, 1, 10), dt.date(2024, 1, 20))


def regime_dummies(tokens: pd.Series) -> pd.DataFrame:
    """Indicator columns for the four non-neutral regimes (neutral omitted)."""
    out = pd.DataFrame(index=tokens.index)
    for tok in _DUMMY_ORDER:
        out[tok] = (tokens == tok).astype(float)
    return out


def _complete(frame: pd.DataFrame, cols: list) -> pd.DataFrame:
    sub = frame[cols].dropna()
    if sub.empty:
        raise EmptySampleError(f"no complete cases over {cols}")
    return sub


# ---------------------------------------------------------------------------
# Model suites
# ---------------------------------------------------------------------------

def _fit(y, design: pd.DataFrame, hac_lag: int) -> RegressionResult:
    X = np.column_stack([np.ones(len(design)), design.values])
    return ols(np.asarray(y, float), X, cov=("hac", hac_lag),
               names=["const"] + list(design.columns))


def _progressive_models(frame: pd.DataFrame, hac_lag: int) -> list[dict]:
    cols = ["sig_total", "vol_norm", "regime", "log_volume", "log_ret", "extremity"]
    data = _complete(frame, cols)
    y = data["sig_total"]
    dummies = regime_dummies(data["regime"])
    etf = pd.Series(
        [(ETF_WINDOW[0] <= ts.date() <= ETF_WINDOW[1]) for ts in data.index],
        index=data.index, dtype=float, name="etf_event",
    )

    designs = [
        ("vol_only", data[["vol_norm"]]),
        ("vol_regimes", pd.concat([data[["vol_norm"]], dummies], axis=1)),
        ("vol_regimes_controls",
         pd.concat([data[["vol_norm"]], dummies, data[["log_volume", "log_ret"]]], axis=1)),
        ("vol_regimes_controls_etf",
         pd.concat([data[["vol_norm"]], dummies, data[["log_volume", "log_ret"]], etf], axis=1)),
        ("continuous_extremity", data[["vol_norm", "extremity"]]),
    ]
    out, prev_r2 = [], None
    for name, design in designs:
        res = _fit(y, design, hac_lag)
        row = {"model": name, "result": res, "n": res.n, "r2": res.r2,
               "delta_r2": (res.r2 - prev_r2) if prev_r2 is not None else np.nan}
        if any(tok in design.columns for tok in _DUMMY_ORDER):
            row["joint_f"] = wald_f_test(res, _DUMMY_ORDER)
        out.append(row)
        prev_r2 = res.r2
    return out


def _kitchen_sink_models(frame: pd.DataFrame, hac_lag: int) -> list[dict]:
    work = frame.copy()
    work = work[work["cs_spread"] > 0]
    work["spread_bps"] = work["cs_spread"] * 1e4
    work["abs_ret"] = work["log_ret"].abs()
    cols = ["spread_bps", "regime", "rv", "abs_ret", "log_volume"]
    data = _complete(work, cols)
    y = data["spread_bps"]
    dummies = regime_dummies(data["regime"])
    rv2 = (data["rv"] ** 2).rename("rv_sq")

    dow = pd.get_dummies(pd.Series([ts.dayofweek for ts in data.index], index=data.index),
                         prefix="dow", drop_first=True).astype(float)
    month = pd.get_dummies(pd.Series([ts.month for ts in data.index], index=data.index),
                           prefix="month", drop_first=True).astype(float)
    year = pd.get_dummies(pd.Series([ts.year for ts in data.index], index=data.index),
                          prefix="year", drop_first=True).astype(float)

    designs = [
        ("regimes", dummies),
        ("regimes_vol", pd.concat([dummies, data[["rv"]], rv2], axis=1)),
        ("regimes_vol_flow", pd.concat([dummies, data[["rv"]], rv2,
                                        data[["abs_ret", "log_volume"]]], axis=1)),
        ("regimes_vol_flow_dow", pd.concat([dummies, data[["rv"]], rv2,
                                            data[["abs_ret", "log_volume"]], dow], axis=1)),
        ("kitchen_sink", pd.concat([dummies, data[["rv"]], rv2,
                                    data[["abs_ret", "log_volume"]], dow, month, year], axis=1)),
    ]
    out, prev_r2 = [], None
    for name, design in designs:
        res = _fit(y, design, hac_lag)
        out.append({"model": name, "result": res, "n": res.n, "r2": res.r2,
                    "delta_r2": (res.r2 - prev_r2) if prev_r2 is not None else np.nan,
                    "joint_f": wald_f_test(res, _DUMMY_ORDER)})
        prev_r2 = res.r2
    return out


def regime_model_suite(frame: pd.DataFrame, suite: str = "progressive",
                       hac_lag: Optional[int] = None) -> list[dict]:
    """Fit a regression ladder on the feature frame.

    ``progressive`` explains the uncertainty index (volatility control plus
    regime dummies, flow controls, an event dummy, then a continuous
    extremity measure; HAC lag 5). ``kitchen_sink`` explains the spread in
    basis points on positive-spread days with progressively richer controls
    through calendar fixed effects (HAC lag 10).
    """
    if suite == "progressive":
        return _progressive_models(frame, hac_lag if hac_lag is not None else 5)
    if suite == "kitchen_sink":
        return _kitchen_sink_models(frame, hac_lag if hac_lag is not None else 10)
    raise ValueError(f"unknown suite {suite!r}")


# ---------------------------------------------------------------------------
# Stratification
# ---------------------------------------------------------------------------

@dataclass
class QuintileResult:
    """Per-quintile extreme-vs-neutral comparison with Holm adjustment."""

    table: pd.DataFrame              # one row per quintile
    pooled: GapStats                 # within-quintile demeaned pooled test
    stratified_d: float              # median of quintile Cohen's d
    skipped: list = field(default_factory=list)


def quintile_stratification(uncertainty, volatility, regimes, B: int = 10000,
                            seed: int = 42) -> QuintileResult:
    """Compare extreme vs neutral uncertainty within volatility quintiles.

    Quintile membership comes from a stable sort of the pooled complete-case
    sample on volatility (ties keep date order), split into five equal-size
    groups. Quintiles with fewer than two observations in either group are
    skipped and flagged. Holm's adjustment runs across the tested quintiles.
    """
    df = pd.DataFrame({
        "u": pd.Series(uncertainty).astype(float),
        "vol": pd.Series(volatility).astype(float),
        "regime": pd.Series(regimes).astype(str),
    }).dropna()
    if df.empty:
        raise EmptySampleError("no complete cases for stratification")

    order = np.argsort(df["vol"].values, kind="stable")
    quintile = np.empty(len(df), dtype=int)
    for q, chunk in enumerate(np.array_split(order, 5)):
        quintile[chunk] = q
    df["quintile"] = quintile

    rows, raw_ps, tested, skipped, ds = [], [], [], [], []
    demeaned_ext, demeaned_neu = [], []
    for q in range(5):
        cell = df[df["quintile"] == q]
        ext = cell.loc[cell["regime"].isin(_EXTREME), "u"].values
        neu = cell.loc[cell["regime"] == _NEUTRAL, "u"].values
        if len(ext) < 2 or len(neu) < 2:
            skipped.append(q)
            rows.append({"quintile": q + 1, "n_extreme": len(ext), "n_neutral": len(neu),
                         "gap": np.nan, "ci_lo": np.nan, "ci_hi": np.nan,
                         "cohens_d": np.nan, "p_raw": np.nan, "skipped": True})
            continue
        g = gap_stats(ext, neu, B=B, seed=seed + 1000 * q)
        tested.append(q)
        raw_ps.append(g.welch_p)
        ds.append(g.cohens_d)
        rows.append({"quintile": q + 1, "n_extreme": g.n_a, "n_neutral": g.n_b,
                     "gap": g.gap, "ci_lo": g.boot_ci[0], "ci_hi": g.boot_ci[1],
                     "cohens_d": g.cohens_d, "p_raw": g.welch_p, "skipped": False})
        center = np.concatenate([ext, neu]).mean()
        demeaned_ext.append(ext - center)
        demeaned_neu.append(neu - center)

    if not tested:
        raise EmptySampleError("all quintiles skipped: no testable cells")

    adj = holm_bonferroni(raw_ps)
    table = pd.DataFrame(rows)
    table["p_holm"] = np.nan
    for qi, a in zip(tested, adj):
        table.loc[table["quintile"] == qi + 1, "p_holm"] = a

    pooled = gap_stats(np.concatenate(demeaned_ext), np.concatenate(demeaned_neu),
                       B=B, seed=seed + 9000)
    return QuintileResult(table, pooled, float(np.median(ds)), skipped)


# ---------------------------------------------------------------------------
# Residual-on-residual
# ---------------------------------------------------------------------------

def residual_on_residual(spread, uncertainty, volatility, regimes, hac_lag: int = 5) -> dict:
    """Purge volatility from spread and uncertainty, then relate residuals.

    Returns the residual Pearson correlation with a HAC p-value from the
    slope of the residual regression, plus Welch tests of uncertainty
    residuals for extreme greed, extreme fear, and pooled extreme against
    neutral.
    """
    df = pd.DataFrame({
        "spread": pd.Series(spread).astype(float),
        "u": pd.Series(uncertainty).astype(float),
        "vol": pd.Series(volatility).astype(float),
        "regime": pd.Series(regimes).astype(str),
    }).dropna()
    if len(df) < 10:
        raise InsufficientDataError("too few complete cases")

    X = np.column_stack([np.ones(len(df)), df["vol"].values])
    resid_s = ols(df["spread"].values, X, names=["const", "vol"]).residuals
    resid_u = ols(df["u"].values, X, names=["const", "vol"]).residuals
    if np.allclose(resid_u, 0.0, atol=1e-12):
        raise DegenerateError("uncertainty is exactly linear in volatility; residuals vanish")

    r = float(np.corrcoef(resid_s, resid_u)[0, 1])
    slope = ols(resid_s, np.column_stack([np.ones(len(df)), resid_u]),
                cov=("hac", hac_lag), names=["const", "resid_u"])
    r_p = slope.coef_p("resid_u")

    def _welch(mask_a, mask_b) -> dict:
        a, b = resid_u[mask_a.values], resid_u[mask_b.values]
        if len(a) < 2 or len(b) < 2:
            return {"n_a": len(a), "n_b": len(b), "t": np.nan, "p": np.nan}
        t, p = stats.ttest_ind(a, b, equal_var=False)
        return {"n_a": len(a), "n_b": len(b), "t": float(t), "p": float(p)}

    neu = df["regime"] == _NEUTRAL
    tests = {
        "extreme_greed_vs_neutral": _welch(df["regime"] == Regime.EXTREME_GREED.token, neu),
        "extreme_fear_vs_neutral": _welch(df["regime"] == Regime.EXTREME_FEAR.token, neu),
        "extreme_vs_neutral": _welch(df["regime"].isin(_EXTREME), neu),
    }
    return {"residual_r": r, "residual_p": r_p, "n": len(df), "regime_tests": tests}


# ---------------------------------------------------------------------------
# Rolling correlation and event study
# ---------------------------------------------------------------------------

def rolling_correlation(a, b, window: int = 90, step: Optional[int] = None) -> dict:
    """Pearson correlation over stepped windows (default non-overlapping)."""
    df = pd.DataFrame({"a": pd.Series(a).astype(float),
                       "b": pd.Series(b).astype(float)}).dropna()
    n = len(df)
    if n < window:
        raise InsufficientDataError(f"need >= {window} complete cases, got {n}")
    step = window if step is None else step
    rows = []
    start = 0
    while start + window <= n:
        chunk = df.iloc[start:start + window]
        rows.append({"start": chunk.index[0], "end": chunk.index[-1],
                     "r": float(np.corrcoef(chunk["a"], chunk["b"])[0, 1])})
        start += step
    table = pd.DataFrame(rows)
    rs = table["r"].values
    return {"windows": table, "n_windows": len(rs), "mean_r": float(rs.mean()),
            "min_r": float(rs.min()), "max_r": float(rs.max()),
            "share_positive": float((rs > 0).mean()),
            "n_positive": int((rs > 0).sum())}


def transition_event_study(uncertainty, regimes, window: int = 3) -> dict:
    """Mean uncertainty change around regime transitions.

    For each event at day t, the change is mean(u[t .. t+w-1]) minus
    mean(u[t-w .. t-1]); events without complete windows are dropped. Event
    types with no occurrences are skipped and flagged.
    """
    u = pd.Series(uncertainty).astype(float).values
    toks = pd.Series(regimes).astype(str).values
    n = len(u)
    is_ext = np.isin(toks, _EXTREME)
    is_neu = toks == _NEUTRAL

    def _events(membership: np.ndarray, enter: bool) -> list:
        flips = []
        for t in range(1, n):
            if enter and membership[t] and not membership[t - 1]:
                flips.append(t)
            if not enter and not membership[t] and membership[t - 1]:
                flips.append(t)
        return flips

    kinds = {
        "enter_extreme": _events(is_ext, True),
        "exit_extreme": _events(is_ext, False),
        "enter_neutral": _events(is_neu, True),
        "exit_neutral": _events(is_neu, False),
    }
    out, skipped = {}, []
    for kind, idxs in kinds.items():
        deltas = []
        for t in idxs:
            if t - window < 0 or t + window - 1 >= n:
                continue
            after = u[t:t + window]
            before = u[t - window:t]
            if np.isnan(after).any() or np.isnan(before).any():
                continue
            deltas.append(after.mean() - before.mean())
        if not deltas:
            skipped.append(kind)
            continue
        deltas = np.asarray(deltas)
        if len(deltas) >= 2 and deltas.std(ddof=1) > 0:
            t_stat, p = stats.ttest_1samp(deltas, 0.0)
        else:
            t_stat, p = np.nan, np.nan
        out[kind] = {"n_events": len(deltas), "mean_change": float(deltas.mean()),
                     "t": float(t_stat) if t_stat == t_stat else np.nan,
                     "p": float(p) if p == p else np.nan}
    return {"events": out, "skipped": skipped, "window": window}


# ---------------------------------------------------------------------------
# Contrarian backtest
# ---------------------------------------------------------------------------

def contrarian_backtest(log_returns, regimes, cost_bps: float = 20.0) -> dict:
    """Long-only contrarian rule: buy extreme fear, exit on neutral-or-better.

    Enters at the close of the first day of an extreme-fear run while flat;
    exits at the close of the first later day whose regime is neutral or
    greedier. Each round trip pays ``cost_bps`` (round-trip, in bps). Total
    net return is the sum of per-trade net returns; buy-and-hold compounds
    the full return series.
    """
    r = pd.Series(log_returns).astype(float).values
    toks = pd.Series(regimes).astype(str).values
    n = len(toks)
    ef = Regime.EXTREME_FEAR.token
    at_least_neutral = {Regime.NEUTRAL.token, Regime.GREED.token, Regime.EXTREME_GREED.token}
    cost = cost_bps * 1e-4

    trades = []
    t = 0
    while t < n:
        is_run_start = toks[t] == ef and (t == 0 or toks[t - 1] != ef)
        if not is_run_start:
            t += 1
            continue
        entry = t
        exit_day = None
        for t2 in range(entry + 1, n):
            if toks[t2] in at_least_neutral:
                exit_day = t2
                break
        forced = exit_day is None
        exit_day = exit_day if exit_day is not None else n - 1
        if exit_day <= entry:
            break
        seg = r[entry + 1:exit_day + 1]
        gross = float(np.exp(np.nansum(seg)) - 1.0)
        trades.append({"entry": entry, "exit": exit_day, "days_held": exit_day - entry,
                       "gross_return": gross, "net_return": gross - cost,
                       "forced_exit": forced})
        t = exit_day + 1

    nets = np.array([tr["net_return"] for tr in trades]) if trades else np.array([])
    bh = float(np.exp(np.nansum(r)) - 1.0)
    return {
        "trades": trades,
        "n_trades": len(trades),
        "win_rate": float((nets > 0).mean()) if len(nets) else np.nan,
        "mean_net_return": float(nets.mean()) if len(nets) else 0.0,
        "total_net_return": float(nets.sum()),
        "buy_and_hold": bh,
        "cost_bps": cost_bps,
    }


# ---------------------------------------------------------------------------
# Variance decomposition
# ---------------------------------------------------------------------------

def variance_decomposition(uncertainty, volatility, regimes) -> dict:
    """R-squared ladder: volatility only, plus regimes, regimes only."""
    df = pd.DataFrame({
        "u": pd.Series(uncertainty).astype(float),
        "vol": pd.Series(volatility).astype(float),
        "regime": pd.Series(regimes).astype(str),
    }).dropna()
    if len(df) < 10:
        raise InsufficientDataError("too few complete cases")
    y = df["u"].values
    const = np.ones((len(df), 1))
    dummies = regime_dummies(df["regime"]).values

    vol_only = ols(y, np.hstack([const, df[["vol"]].values]), names=["const", "vol"])
    full = ols(y, np.hstack([const, df[["vol"]].values, dummies]),
               names=["const", "vol"] + _DUMMY_ORDER)
    reg_only = ols(y, np.hstack([const, dummies]), names=["const"] + _DUMMY_ORDER)
    joint = ssr_f_test(vol_only, full)

    return {
        "r2_vol_only": vol_only.r2,
        "r2_vol_regimes": full.r2,
        "r2_regimes_only": reg_only.r2,
        "incremental_r2": full.r2 - vol_only.r2,
        "joint_f": joint,
        "n": len(df),
        "models": {"vol_only": vol_only, "vol_regimes": full, "regimes_only": reg_only},
    }
