"""OLS and 2SLS with classical, Newey-West HAC, and HC3 covariance.

Covariance flavors:
    classical : s^2 (X'X)^-1
    hc0/hc3   : White sandwich, HC3 with (1 - h_ii)^-2 leverage correction
    hac(L)    : Newey-West with Bartlett weights 1 - j/(L+1); L = 0 equals
                HC0 exactly.

p-values are two-sided against t(n - k).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import stats

from ..errors import SingularDesignError

CovSpec = Union[str, tuple]     # "classical" | "hc0" | "hc3" | ("hac", L)


@dataclass
class RegressionResult:
    """Coefficients, covariance, and fit statistics of one linear model."""

    params: np.ndarray
    cov: np.ndarray
    cov_flavor: str
    names: list
    r2: float
    adj_r2: float
    n: int
    dof: int
    residuals: np.ndarray
    fitted: np.ndarray
    ssr: float
    joint_f: Optional[dict] = None
    xtx_inv: np.ndarray = field(default=None, repr=False)

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.diag(self.cov))

    @property
    def tvalues(self) -> np.ndarray:
        return self.params / self.se

    @property
    def pvalues(self) -> np.ndarray:
        return 2.0 * stats.t.sf(np.abs(self.tvalues), self.dof)

    def coef(self, name: str) -> float:
        return float(self.params[self.names.index(name)])

    def coef_se(self, name: str) -> float:
        return float(self.se[self.names.index(name)])

    def coef_p(self, name: str) -> float:
        return float(self.pvalues[self.names.index(name)])

    def table(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"coef": self.params, "se": self.se, "t": self.tvalues, "p": self.pvalues},
            index=self.names,
        )


def add_constant(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return np.column_stack([np.ones(len(X)), X])


def _as_design(X, names: Optional[Sequence[str]]):
    if isinstance(X, pd.DataFrame):
        return X.values.astype(float), list(X.columns)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if names is None:
        names = [f"x{i}" for i in range(X.shape[1])]
    return X, list(names)


def _check_rank(X: np.ndarray, names: list):
    rank = np.linalg.matrix_rank(X)
    if rank < X.shape[1]:
        collinear = []
        for j in range(X.shape[1]):
            others = np.delete(X, j, axis=1)
            if others.shape[1] == 0:
                continue
            coef, *_ = np.linalg.lstsq(others, X[:, j], rcond=None)
            resid = X[:, j] - others @ coef
            if np.linalg.norm(resid) < 1e-8 * max(1.0, np.linalg.norm(X[:, j])):
                collinear.append(names[j])
        raise SingularDesignError(f"design matrix rank {rank} < {X.shape[1]}; collinear columns: {collinear}")


def _hac_meat(X: np.ndarray, resid: np.ndarray, lag: int) -> np.ndarray:
    u = X * resid[:, None]
    S = u.T @ u
    for j in range(1, lag + 1):
        w = 1.0 - j / (lag + 1.0)
        gamma = u[j:].T @ u[:-j]
        S += w * (gamma + gamma.T)
    return S


def _covariance(flavor: CovSpec, X, resid, xtx_inv, n, k):
    if isinstance(flavor, tuple):
        kind, lag = flavor
        if kind != "hac" or lag < 0:
            raise ValueError(f"unknown covariance flavor {flavor!r}")
        S = _hac_meat(X, resid, int(lag))
        return xtx_inv @ S @ xtx_inv, f"hac({int(lag)})"
    if flavor == "classical":
        s2 = resid @ resid / (n - k)
        return s2 * xtx_inv, "classical"
    if flavor == "hc0":
        S = (X * (resid ** 2)[:, None]).T @ X
        return xtx_inv @ S @ xtx_inv, "hc0"
    if flavor == "hc3":
        h = np.einsum("ij,jk,ik->i", X, xtx_inv, X)
        w = (resid / (1.0 - h)) ** 2
        S = (X * w[:, None]).T @ X
        return xtx_inv @ S @ xtx_inv, "hc3"
    raise ValueError(f"unknown covariance flavor {flavor!r}")


def ols(y, X, cov: CovSpec = "classical", names: Optional[Sequence[str]] = None) -> RegressionResult:
    """Least squares with selectable covariance; raises on rank deficiency."""
    y = np.asarray(y, dtype=float).ravel()
    X, names = _as_design(X, names)
    n, k = X.shape
    if n <= k:
        raise SingularDesignError(f"n={n} observations for k={k} parameters")
    _check_rank(X, names)

    xtx_inv = np.linalg.inv(X.T @ X)
    params = xtx_inv @ (X.T @ y)
    fitted = X @ params
    resid = y - fitted
    ssr = float(resid @ resid)
    tss = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ssr / tss if tss > 0 else 0.0
    adj = 1.0 - (1.0 - r2) * (n - 1) / (n - k) if n > k else np.nan

    V, label = _covariance(cov, X, resid, xtx_inv, n, k)
    return RegressionResult(params, V, label, names, r2, adj, n, n - k,
                            resid, fitted, ssr, xtx_inv=xtx_inv)


def wald_f_test(result: RegressionResult, restrict_names: Sequence[str]) -> dict:
    """Wald F-test of H0: the named coefficients are jointly zero.

    Uses the result's own covariance, so HAC results give a HAC F.
    """
    idx = [result.names.index(nm) for nm in restrict_names]
    R = np.zeros((len(idx), len(result.params)))
    for row, j in enumerate(idx):
        R[row, j] = 1.0
    rb = R @ result.params
    mid = np.linalg.inv(R @ result.cov @ R.T)
    q = len(idx)
    f = float(rb @ mid @ rb) / q
    p = float(stats.f.sf(f, q, result.dof))
    return {"stat": f, "df1": q, "df2": result.dof, "p": p}


def ssr_f_test(restricted: RegressionResult, unrestricted: RegressionResult) -> dict:
    """Classical SSR-based F-test of nested models."""
    q = restricted.dof - unrestricted.dof
    if q <= 0:
        raise ValueError("restricted model must have fewer parameters")
    f = ((restricted.ssr - unrestricted.ssr) / q) / (unrestricted.ssr / unrestricted.dof)
    p = float(stats.f.sf(f, q, unrestricted.dof))
    return {"stat": float(f), "df1": q, "df2": unrestricted.dof, "p": p}


def iv_2sls(y, x_endog, instruments, controls=None, hac_lag: int = 5) -> dict:
    """Two-stage least squares with a first-stage diagnostic and OLS contrast.

    The structural design is [const, controls, endog]; the instrument set is
    [const, controls, excluded instruments]. When the excluded instruments
    equal the endogenous regressor, the projection is the identity and 2SLS
    reproduces OLS exactly.
    """
    y = np.asarray(y, dtype=float).ravel()
    x_endog = np.asarray(x_endog, dtype=float).ravel()
    inst = np.asarray(instruments, dtype=float)
    if inst.ndim == 1:
        inst = inst[:, None]
    if inst.shape[1] < 1:
        raise ValueError("need at least one excluded instrument")
    ctrl = None
    if controls is not None:
        ctrl = np.asarray(controls, dtype=float)
        if ctrl.ndim == 1:
            ctrl = ctrl[:, None]

    n = len(y)
    const = np.ones((n, 1))
    X = np.hstack([const] + ([ctrl] if ctrl is not None else []) + [x_endog[:, None]])
    Z = np.hstack([const] + ([ctrl] if ctrl is not None else []) + [inst])
    x_names = (["const"] + [f"ctrl{i}" for i in range(ctrl.shape[1])] if ctrl is not None else ["const"])
    x_names = x_names + ["endog"]
    z_names = x_names[:-1] + [f"iv{i}" for i in range(inst.shape[1])]

    first = ols(x_endog, Z, cov="classical", names=z_names)
    excluded = [nm for nm in z_names if nm.startswith("iv")]
    first_f = wald_f_test(first, excluded)

    _check_rank(Z, z_names)
    ztz_inv = np.linalg.inv(Z.T @ Z)
    xhat = Z @ (ztz_inv @ (Z.T @ X))
    xx_inv = np.linalg.inv(xhat.T @ X)
    beta = xx_inv @ (xhat.T @ y)
    resid = y - X @ beta
    bread = np.linalg.inv(xhat.T @ xhat)
    S = _hac_meat(xhat, resid, hac_lag)
    V = bread @ S @ bread
    dof = n - X.shape[1]
    tvals = beta / np.sqrt(np.diag(V))
    second = {
        "params": beta, "se": np.sqrt(np.diag(V)), "names": x_names,
        "t": tvals, "p": 2.0 * stats.t.sf(np.abs(tvals), dof), "cov_flavor": f"hac({hac_lag})",
    }

    comparison = ols(y, X, cov=("hac", hac_lag), names=x_names)
    b_ols = comparison.coef("endog")
    b_iv = float(beta[x_names.index("endog")])
    pct = abs(b_iv - b_ols) / abs(b_ols) * 100.0 if b_ols != 0 else np.nan

    return {
        "first_stage": first,
        "first_stage_f": first_f,
        "second_stage": second,
        "ols": comparison,
        "coef_ols": b_ols,
        "coef_2sls": b_iv,
        "pct_difference": pct,
    }
