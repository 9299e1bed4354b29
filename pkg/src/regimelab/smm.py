"""Reduced-form chartist-fundamentalist simulator and SMM estimator.

Model (daily frequency, log prices):
    ln sigma_t = (1 - rho) ln sigma_bar + rho ln sigma_{t-1} + eta_t,
                 eta ~ N(0, sigma_noise^2)
    f_t        = f_{t-1} + sigma_fund zeta_t            (fundamental value)
    r_t        = phi kappa r_{t-1}
                 - (1 - phi) lambda_f (p_{t-1} - f_{t-1})
                 + sigma_t eps_t,        p_t = p_{t-1} + r_t
    spread_t   = s0 + delta_s sigma_t + spread_noise xi_t
    volume_t   = v0 (1 + c_sig sigma_t / sigma_bar + c_ret |r_t| / sigma_t)
                 + volume_noise nu_t

kappa, lambda_f, sigma_bar, s0, v0, c_sig, c_ret and the two measurement
noise scales are fixed constants (module level); the five free parameters
are (sigma_fund, sigma_noise, delta_s, rho, phi). The volume equation loads
on the volatility level as well as the standardized shock so that volume
persistence is informative about rho.

Estimation minimizes Q = (m_real - m_sim)' W (m_real - m_sim) with identity
W by Nelder-Mead from random restarts, under common random numbers: the R
simulation shock panels are fixed functions of (seed, replicate index), so
Q is a deterministic surface. Substituting the return recursion gives an
AR(2) in r driven by a precomputable input, so a whole replicate panel is
two linear filters - no per-day Python loop.

The chi-square overidentification J uses the moment-gap covariance estimated
from the per-replicate moments at the optimum (with identity W the raw
T-scaled Q is not chi-square distributed; both Q and T*Q are still reported).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize, signal, stats

from .errors import ConfigurationError, DegenerateError, NonConvergenceError

# Fixed structural constants (documented in run configs)
KAPPA = 0.5            # chartist momentum strength
LAMBDA_F = 0.08        # fundamentalist reversion speed
SIGMA_BAR = 0.02       # unconditional daily volatility anchor
S0 = 5.0               # base spread, bps
V0 = 1.0               # base volume
C_SIG = 1.2            # volume loading on volatility level
C_RET = 0.6            # volume loading on standardized |return|
SPREAD_NOISE = 0.6     # bps, measurement noise on spread
VOLUME_NOISE = 0.10
BURN_IN = 120

MOMENT_NAMES = ["acf1_absret", "acf5_absret", "acf10_absret",
                "excess_kurtosis", "acf1_volume", "corr_spread_vol"]

DEFAULT_BOUNDS = {
    "sigma_fund": (0.001, 0.05),
    "sigma_noise": (0.05, 0.80),
    "delta_s": (0.10, 5.00),
    "rho": (0.05, 0.98),
    "phi": (0.05, 0.95),
}
PARAM_NAMES = list(DEFAULT_BOUNDS)


@dataclass(frozen=True)
class SmmParams:
    """Free parameters of the reduced-form simulator."""

    sigma_fund: float
    sigma_noise: float
    delta_s: float
    rho: float
    phi: float

    def __post_init__(self):
        if self.sigma_fund < 0 or self.sigma_noise < 0 or self.delta_s < 0:
            raise ConfigurationError("scale parameters must be nonnegative")
        if not 0 <= self.rho < 1:
            raise ConfigurationError("rho must lie in [0, 1) for stationarity")
        if not 0 <= self.phi <= 1:
            raise ConfigurationError("phi must lie in [0, 1]")

    def as_array(self) -> np.ndarray:
        return np.array([self.sigma_fund, self.sigma_noise, self.delta_s, self.rho, self.phi])

    @classmethod
    def from_array(cls, arr) -> "SmmParams":
        return cls(*[float(v) for v in arr])


@dataclass(frozen=True)
class MomentVector:
    """Six target moments of a (returns, volume, spread, vol) panel."""

    acf1_absret: float
    acf5_absret: float
    acf10_absret: float
    excess_kurtosis: float
    acf1_volume: float
    corr_spread_vol: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in MOMENT_NAMES])

    @classmethod
    def from_array(cls, arr) -> "MomentVector":
        return cls(*[float(v) for v in arr])


# ---------------------------------------------------------------------------
# Moment helpers
# ---------------------------------------------------------------------------

def acf(x, lag: int) -> float:
    """Sample autocorrelation at ``lag`` (mean-removed, biased denominator)."""
    x = np.asarray(x, dtype=float)
    if len(x) < lag + 2:
        raise DegenerateError(f"series of {len(x)} too short for lag {lag}")
    xc = x - x.mean()
    denom = float(xc @ xc)
    if denom == 0.0:
        raise DegenerateError("constant series has no autocorrelation")
    return float(xc[lag:] @ xc[:-lag]) / denom


def excess_kurtosis(x) -> float:
    """Fourth standardized moment minus 3 (normal -> 0)."""
    x = np.asarray(x, dtype=float)
    xc = x - x.mean()
    m2 = float((xc ** 2).mean())
    if m2 == 0.0:
        raise DegenerateError("constant series has no kurtosis")
    return float((xc ** 4).mean() / m2 ** 2 - 3.0)


def compute_moments(returns, volume, spread, vol) -> MomentVector:
    """Moment vector from aligned daily series; raises on constant inputs."""
    r = np.asarray(returns, dtype=float)
    v = np.asarray(volume, dtype=float)
    s = np.asarray(spread, dtype=float)
    sig = np.asarray(vol, dtype=float)
    if len(r) < 12:
        raise DegenerateError("need at least 12 observations for lag-10 moments")
    if np.std(s) == 0 or np.std(sig) == 0:
        raise DegenerateError("constant spread or vol series")
    corr = float(np.corrcoef(s, sig)[0, 1])
    absr = np.abs(r)
    return MomentVector(acf(absr, 1), acf(absr, 5), acf(absr, 10),
                        excess_kurtosis(r), acf(v, 1), corr)


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

def _draw_shocks(seed: int, n_rep: int, T: int) -> np.ndarray:
    """(n_rep, T + BURN_IN, 5) standard normals; replicate i uses stream
    (seed, i), so panels are identical regardless of scheduling."""
    total = T + BURN_IN
    out = np.empty((n_rep, total, 5))
    for i in range(n_rep):
        out[i] = np.random.default_rng([int(seed), i]).standard_normal((total, 5))
    return out


def _simulate_batch(params: SmmParams, shocks: np.ndarray) -> dict:
    """Vectorized panel simulation; shocks is (R, T+burn, 5)."""
    eta, eps, zeta, xi, nu = (shocks[:, :, j] for j in range(5))
    rho, phi = params.rho, params.phi

    ln_bar = np.log(SIGMA_BAR)
    x_vol = (1.0 - rho) * ln_bar + params.sigma_noise * eta
    zi = np.full((shocks.shape[0], 1), rho * ln_bar)
    ln_sig, _ = signal.lfilter([1.0], [1.0, -rho], x_vol, axis=1, zi=zi)
    sig = np.exp(ln_sig)

    # AR(2) reduction of the (return, price-gap) system
    a_mom = phi * KAPPA
    b_rev = (1.0 - phi) * LAMBDA_F
    u = sig * eps
    w = u.copy()
    w[:, 1:] += -u[:, :-1] + b_rev * params.sigma_fund * zeta[:, :-1]
    a = [1.0, -(1.0 + a_mom - b_rev), a_mom]
    r = signal.lfilter([1.0], a, w, axis=1)

    spread = S0 + params.delta_s * sig + SPREAD_NOISE * xi
    volume = V0 * (1.0 + C_SIG * sig / SIGMA_BAR + C_RET * np.abs(r) / sig) + VOLUME_NOISE * nu

    sl = slice(BURN_IN, None)
    return {"returns": r[:, sl], "volume": volume[:, sl],
            "spread": spread[:, sl], "vol": sig[:, sl]}


def simulate_reduced_form(params: SmmParams, T: int, seed: int) -> dict:
    """One synthetic panel of T days: returns, volume, spread, latent vol."""
    if T < 100:
        raise ConfigurationError("T must be >= 100")
    batch = _simulate_batch(params, _draw_shocks(seed, 1, T))
    return {k: v[0] for k, v in batch.items()}


def _batch_moments(batch: dict) -> np.ndarray:
    """(R, 6) moments computed across the replicate axis without loops."""
    r = batch["returns"]
    v = batch["volume"]
    s = batch["spread"]
    sig = batch["vol"]

    def _acf_rows(x, lag):
        xc = x - x.mean(axis=1, keepdims=True)
        denom = (xc ** 2).sum(axis=1)
        return (xc[:, lag:] * xc[:, :-lag]).sum(axis=1) / denom

    absr = np.abs(r)
    rc = r - r.mean(axis=1, keepdims=True)
    m2 = (rc ** 2).mean(axis=1)
    kurt = (rc ** 4).mean(axis=1) / m2 ** 2 - 3.0

    sc = s - s.mean(axis=1, keepdims=True)
    gc = sig - sig.mean(axis=1, keepdims=True)
    corr = (sc * gc).sum(axis=1) / np.sqrt((sc ** 2).sum(axis=1) * (gc ** 2).sum(axis=1))

    return np.column_stack([_acf_rows(absr, 1), _acf_rows(absr, 5), _acf_rows(absr, 10),
                            kurt, _acf_rows(v, 1), corr])


def simulated_moments(params: SmmParams, T: int, R: int, seed: int,
                      shocks: Optional[np.ndarray] = None) -> tuple[np.ndarray, np.ndarray]:
    """Mean simulated moment vector over R replicates, plus per-replicate rows."""
    if shocks is None:
        shocks = _draw_shocks(seed, R, T)
    rows = _batch_moments(_simulate_batch(params, shocks))
    return rows.mean(axis=0), rows


def smm_objective(params: SmmParams, target: MomentVector, R: int, seed: int,
                  T: int = 739, W: Optional[np.ndarray] = None,
                  shocks: Optional[np.ndarray] = None) -> float:
    """Q = (m_real - m_sim)' W (m_real - m_sim); identity W by default."""
    if R < 1:
        raise ConfigurationError("R must be >= 1")
    m_sim, _ = simulated_moments(params, T, R, seed, shocks=shocks)
    g = target.as_array() - m_sim
    if W is None:
        return float(g @ g)
    return float(g @ W @ g)


# ---------------------------------------------------------------------------
# Estimation
# ---------------------------------------------------------------------------

@dataclass
class SmmEstimate:
    """Point estimate with restart trace and overidentification test."""

    params: SmmParams
    se: np.ndarray
    q_min: float
    j_stat: float
    df: int
    p_value: float
    t_scaled_q: float
    restarts: list = field(default_factory=list)
    n_moments: int = 6
    n_params: int = 5
    target: Optional[MomentVector] = None


def _bounds_arrays(bounds: dict) -> tuple[np.ndarray, np.ndarray]:
    lo = np.array([bounds[n][0] for n in PARAM_NAMES], dtype=float)
    hi = np.array([bounds[n][1] for n in PARAM_NAMES], dtype=float)
    if np.any(lo > hi):
        raise ConfigurationError("bounds must satisfy lo <= hi")
    return lo, hi


def smm_estimate(target: MomentVector, bounds: Optional[dict] = None, R: int = 100,
                 restarts: int = 10, seed: int = 42, T: int = 739,
                 maxiter: int = 400, target_paths: int = 1) -> SmmEstimate:
    """Nelder-Mead SMM under common random numbers with random restarts.

    Starts are drawn uniformly inside the bounds; out-of-bounds proposals are
    clipped with a smooth quadratic penalty. Standard errors use the usual
    sandwich with the moment Jacobian from central differences on the
    CRN-averaged moments and the replicate moment covariance.

    ``target_paths`` is the number of independent T-day panels averaged into
    the target (1 for an empirical sample); it sets the target side of the
    moment-gap covariance behind the J statistic.
    """
    bounds = dict(DEFAULT_BOUNDS) if bounds is None else bounds
    lo, hi = _bounds_arrays(bounds)
    shocks = _draw_shocks(seed, R, T)
    t_arr = target.as_array()

    def mean_moments(theta: np.ndarray) -> np.ndarray:
        m, _ = simulated_moments(SmmParams.from_array(theta), T, R, seed, shocks=shocks)
        return m

    def objective(theta: np.ndarray) -> float:
        clipped = np.clip(theta, lo, hi)
        penalty = 1e4 * float(((theta - clipped) ** 2).sum())
        g = t_arr - mean_moments(clipped)
        return float(g @ g) + penalty

    if np.all(lo == hi):
        theta_hat = lo.copy()
        q0 = objective(theta_hat)
        restart_log = [{"restart": 0, "x0": theta_hat.tolist(), "q": q0, "nfev": 0,
                        "converged": True}]
        best = (q0, theta_hat)
    else:
        start_rng = np.random.default_rng([int(seed), 982451653])
        best = None
        restart_log = []
        for k in range(restarts):
            x0 = lo + start_rng.random(len(lo)) * (hi - lo)
            res = optimize.minimize(objective, x0, method="Nelder-Mead",
                                    options={"maxiter": maxiter, "xatol": 1e-5,
                                             "fatol": 1e-10, "adaptive": True})
            theta_k = np.clip(res.x, lo, hi)
            restart_log.append({"restart": k, "x0": x0.tolist(), "q": float(res.fun),
                                "nfev": int(res.nfev), "converged": bool(res.success)})
            if best is None or res.fun < best[0]:
                best = (float(res.fun), theta_k)
        starts_best = min(objective(np.array(r["x0"])) for r in restart_log)
        if best is None or best[0] > starts_best + 1e-12:
            raise NonConvergenceError(f"no restart improved on its start; log: {restart_log}")

    q_min, theta_hat = float(best[0]), best[1]
    params_hat = SmmParams.from_array(theta_hat)

    m_sim, rows = simulated_moments(params_hat, T, R, seed, shocks=shocks)
    g = t_arr - m_sim
    omega = np.cov(rows, rowvar=False)
    gap_cov = omega * (1.0 / R + 1.0 / max(target_paths, 1))
    try:
        j_stat = float(g @ np.linalg.solve(gap_cov, g))
    except np.linalg.LinAlgError:
        j_stat = float(g @ np.linalg.pinv(gap_cov) @ g)
    df = len(MOMENT_NAMES) - len(PARAM_NAMES)
    p_value = float(stats.chi2.sf(j_stat, df))

    # Jacobian of mean moments, central differences with relative step 1e-3
    G = np.zeros((len(MOMENT_NAMES), len(PARAM_NAMES)))
    for j in range(len(PARAM_NAMES)):
        h = max(1e-3 * abs(theta_hat[j]), 1e-6)
        up, dn = theta_hat.copy(), theta_hat.copy()
        up[j] = min(up[j] + h, hi[j])
        dn[j] = max(dn[j] - h, lo[j])
        width = up[j] - dn[j]
        if width <= 0:
            continue
        G[:, j] = (mean_moments(up) - mean_moments(dn)) / width
    gtg = G.T @ G
    try:
        gtg_inv = np.linalg.inv(gtg)
    except np.linalg.LinAlgError:
        gtg_inv = np.linalg.pinv(gtg)
    mid = G.T @ omega @ G
    cov_theta = gtg_inv @ mid @ gtg_inv * (1.0 + 1.0 / R) / T
    se = np.sqrt(np.abs(np.diag(cov_theta)))

    return SmmEstimate(params_hat, se, q_min, j_stat, df, p_value,
                       t_scaled_q=T * q_min, restarts=restart_log, target=target)
