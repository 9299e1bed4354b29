"""Stationarity and Granger-causality diagnostics.

The Granger test compares a restricted autoregression of y on its own lags
against the unrestricted model that adds lags of x, via the SSR-based F
statistic, in both directions and for every lag order 1..max_lag. VAR
stability is summarized by the largest companion-matrix eigenvalue modulus.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import stats
from statsmodels.tsa.stattools import adfuller

from ..errors import DegenerateError, InsufficientDataError
from .regression import ols, ssr_f_test


def adf_test(series, max_lag: int | None = None) -> tuple[float, float]:
    """Augmented Dickey-Fuller test with constant; AIC lag selection.

    Lag order is chosen by information criterion up to
    floor(12 * (N/100)^(1/4)). p-values come from the MacKinnon
    response-surface approximation (as tabulated in statsmodels, which
    carries the published regression-surface coefficients).
    """
    x = np.asarray(pd.Series(series).dropna().values, dtype=float)
    if len(x) < 25:
        raise InsufficientDataError(f"ADF needs >= 25 observations, got {len(x)}")
    if np.ptp(x) == 0:
        raise DegenerateError("ADF undefined for a constant series")
    if max_lag is None:
        max_lag = int(np.floor(12.0 * (len(x) / 100.0) ** 0.25))
    tau, pvalue, *_ = adfuller(x, maxlag=max_lag, regression="c", autolag="AIC")
    return float(tau), float(pvalue)


def _lag_matrix(arr: np.ndarray, lags: int) -> np.ndarray:
    """Columns [lag1, ..., lagk] for rows lags..n-1."""
    n = len(arr)
    return np.column_stack([arr[lags - j - 1:n - j - 1] for j in range(lags)])


def _granger_f(y: np.ndarray, x: np.ndarray, lag: int) -> dict:
    n = len(y)
    if n - lag <= 2 * lag + 1:
        raise InsufficientDataError(f"series too short for lag {lag}")
    y_t = y[lag:]
    own = _lag_matrix(y, lag)
    other = _lag_matrix(x, lag)
    const = np.ones((n - lag, 1))
    restricted = ols(y_t, np.hstack([const, own]),
                     names=["const"] + [f"y_l{j}" for j in range(1, lag + 1)])
    unrestricted = ols(y_t, np.hstack([const, own, other]),
                       names=["const"] + [f"y_l{j}" for j in range(1, lag + 1)]
                             + [f"x_l{j}" for j in range(1, lag + 1)])
    return ssr_f_test(restricted, unrestricted)


def _companion_max_eig(x: np.ndarray, y: np.ndarray, lag: int) -> float:
    """Max |eigenvalue| of the VAR(lag) companion matrix for (x, y)."""
    n = len(x)
    const = np.ones((n - lag, 1))
    xl = _lag_matrix(x, lag)
    yl = _lag_matrix(y, lag)
    design = np.hstack([const, xl, yl])
    names = (["const"] + [f"x_l{j}" for j in range(1, lag + 1)]
             + [f"y_l{j}" for j in range(1, lag + 1)])
    bx = ols(x[lag:], design, names=names).params[1:]
    by = ols(y[lag:], design, names=names).params[1:]

    k, p = 2, lag
    A = np.zeros((k * p, k * p))
    for j in range(p):
        # coefficient block of lag j+1: rows are equations (x, y)
        A[0, j * k] = bx[j]          # x on x lag j+1
        A[0, j * k + 1] = bx[p + j]  # x on y lag j+1
        A[1, j * k] = by[j]
        A[1, j * k + 1] = by[p + j]
    if p > 1:
        A[k:, :-k] = np.eye(k * (p - 1))
    return float(np.abs(np.linalg.eigvals(A)).max())


@dataclass
class GrangerReport:
    """Per-lag forward/reverse F-tests plus stationarity diagnostics."""

    forward: pd.DataFrame     # index lag, columns F, p  (x -> y)
    reverse: pd.DataFrame     # y -> x
    adf_x: tuple
    adf_y: tuple
    max_companion_eig: float
    max_lag: int


def granger_suite(x, y, max_lag: int = 5) -> GrangerReport:
    """Bidirectional SSR-based Granger F-tests for lags 1..max_lag.

    Forward direction tests whether lags of ``x`` help predict ``y``.
    Inputs are aligned on their common non-missing rows first.
    """
    joined = pd.DataFrame({"x": pd.Series(x).astype(float), "y": pd.Series(y).astype(float)}).dropna()
    if len(joined) < 10 * max_lag:
        raise InsufficientDataError(f"need >= {10 * max_lag} complete cases, got {len(joined)}")
    xa, ya = joined["x"].values, joined["y"].values

    fwd_rows, rev_rows = [], []
    for lag in range(1, max_lag + 1):
        f = _granger_f(ya, xa, lag)
        r = _granger_f(xa, ya, lag)
        fwd_rows.append({"lag": lag, "F": f["stat"], "p": f["p"]})
        rev_rows.append({"lag": lag, "F": r["stat"], "p": r["p"]})

    return GrangerReport(
        forward=pd.DataFrame(fwd_rows).set_index("lag"),
        reverse=pd.DataFrame(rev_rows).set_index("lag"),
        adf_x=adf_test(xa),
        adf_y=adf_test(ya),
        max_companion_eig=_companion_max_eig(xa, ya, 1),
        max_lag=max_lag,
    )
