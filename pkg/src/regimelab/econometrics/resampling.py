"""Two-group effect statistics, bootstrap, permutation tests, Holm adjustment.

Every resampling routine derives the RNG stream of replicate ``i`` from
``(master_seed, i)``, so results are bit-reproducible for a given (seed, B)
regardless of evaluation order or worker count.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from ..errors import DegenerateError
from ..regimes import Regime, RegimeThresholds, classify, regime_runs

_EXTREME = {Regime.EXTREME_FEAR.token, Regime.EXTREME_GREED.token}
_NEUTRAL = Regime.NEUTRAL.token


def replicate_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent generator for replicate ``index`` of a seeded study."""
    return np.random.default_rng([int(master_seed), int(index)])


@dataclass
class GapStats:
    """Two-group mean gap with Welch t, Cohen's d, and bootstrap interval."""

    n_a: int
    n_b: int
    mean_a: float
    mean_b: float
    gap: float
    welch_t: float
    welch_p: float
    cohens_d: float
    boot_ci: tuple
    boot_se: float
    boot_z: float
    seed: int
    n_boot: int


def gap_stats(group_a, group_b, B: int = 10000, seed: int = 42) -> GapStats:
    """Mean gap a - b with Welch test, pooled-SD d, and iid bootstrap CI."""
    a = np.asarray(group_a, dtype=float)
    b = np.asarray(group_b, dtype=float)
    a, b = a[~np.isnan(a)], b[~np.isnan(b)]
    na, nb = len(a), len(b)
    if na < 2 or nb < 2:
        raise DegenerateError(f"need >= 2 observations per group, got {na} and {nb}")

    ma, mb = a.mean(), b.mean()
    va, vb = a.var(ddof=1), b.var(ddof=1)
    gap = float(ma - mb)

    denom = va / na + vb / nb
    if denom > 0:
        t = gap / np.sqrt(denom)
        df = denom ** 2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
        p = 2.0 * stats.t.sf(abs(t), df)
    else:
        t, p = (0.0, 1.0) if gap == 0 else (np.inf * np.sign(gap), 0.0)

    sp2 = ((na - 1) * va + (nb - 1) * vb) / (na + nb - 2)
    d = gap / np.sqrt(sp2) if sp2 > 0 else (0.0 if gap == 0 else np.inf * np.sign(gap))

    boots = np.empty(B)
    for i in range(B):
        rng = replicate_rng(seed, i)
        boots[i] = a[rng.integers(0, na, na)].mean() - b[rng.integers(0, nb, nb)].mean()
    lo, hi = np.percentile(boots, [2.5, 97.5])
    se = float(boots.std(ddof=1))
    z = gap / se if se > 0 else np.nan

    return GapStats(na, nb, float(ma), float(mb), gap, float(t), float(p), float(d),
                    (float(lo), float(hi)), se, float(z), seed, B)


@dataclass
class PermutationResult:
    """Observed gap against a resampled null distribution."""

    observed: float
    p: float
    null_mean: float
    null_sd: float
    B: int
    B_effective: int
    variant: str
    n_extreme: int
    n_neutral: int
    ar1_phi: Optional[float] = None


def _token(label) -> str:
    return label.token if isinstance(label, Regime) else str(label)


def _extreme_neutral_gap(values: np.ndarray, tokens: np.ndarray) -> float:
    ext = values[np.isin(tokens, list(_EXTREME))]
    neu = values[tokens == _NEUTRAL]
    if len(ext) == 0 or len(neu) == 0:
        return np.nan
    return float(ext.mean() - neu.mean())


def permutation_suite(values, labels, variant: str = "standard", B: int = 10000,
                      seed: int = 42, fg: Optional[Sequence] = None,
                      thresholds: RegimeThresholds = RegimeThresholds()) -> PermutationResult:
    """Permutation test of the extreme-vs-neutral mean gap.

    Variants:
        standard : shuffle the day-level regime labels
        block    : shuffle the order of contiguous same-regime runs,
                   preserving the multiset of run lengths
        ar1      : fit AR(1) to the fear/greed series, simulate label paths
                   with matched innovation variance, classify each path

    p = (1 + #{|null| >= |observed|}) / (B_effective + 1), two-sided.
    Replicates whose synthetic labels lack one of the two classes carry no
    defined gap and drop out of the effective count.
    """
    vals = np.asarray(values, dtype=float)
    tokens = np.array([_token(l) for l in labels])
    keep = ~np.isnan(vals)
    vals, tokens = vals[keep], tokens[keep]

    n_ext = int(np.isin(tokens, list(_EXTREME)).sum())
    n_neu = int((tokens == _NEUTRAL).sum())
    if n_ext == 0 or n_neu == 0:
        raise DegenerateError("both extreme and neutral labels must be present")
    observed = _extreme_neutral_gap(vals, tokens)

    if variant == "ar1":
        if fg is None:
            raise ValueError("ar1 variant requires the fear/greed series")
        fg_arr = np.asarray(fg, dtype=float)[keep]
        y, x = fg_arr[1:], fg_arr[:-1]
        X = np.column_stack([np.ones(len(x)), x])
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        resid = y - X @ coef
        sigma = float(np.sqrt(resid @ resid / max(len(y) - 2, 1)))
        const, phi = float(coef[0]), float(coef[1])
    else:
        const = phi = sigma = None

    null = np.empty(B)
    for i in range(B):
        rng = replicate_rng(seed, i)
        if variant == "standard":
            null[i] = _extreme_neutral_gap(vals, tokens[rng.permutation(len(tokens))])
        elif variant == "block":
            runs = regime_runs(tokens)
            order = rng.permutation(len(runs))
            shuffled = np.concatenate([np.repeat(runs[j][0], runs[j][2]) for j in order])
            null[i] = _extreme_neutral_gap(vals, shuffled)
        elif variant == "ar1":
            sim = np.empty(len(vals))
            sim[0] = fg_arr[0]
            eps = rng.normal(0.0, sigma, len(vals) - 1)
            for t in range(1, len(vals)):
                sim[t] = const + phi * sim[t - 1] + eps[t - 1]
            sim = np.clip(sim, 0.0, 100.0)
            sim_tokens = np.array([r.token for r in classify(sim, thresholds)])
            null[i] = _extreme_neutral_gap(vals, sim_tokens)
        else:
            raise ValueError(f"unknown permutation variant {variant!r}")

    defined = null[~np.isnan(null)]
    b_eff = len(defined)
    if b_eff == 0:
        raise DegenerateError("no permutation replicate produced both classes")
    exceed = int((np.abs(defined) >= abs(observed)).sum())
    p = (1.0 + exceed) / (b_eff + 1.0)

    return PermutationResult(observed, float(p), float(defined.mean()),
                             float(defined.std(ddof=1)) if b_eff > 1 else 0.0,
                             B, b_eff, variant, n_ext, n_neu,
                             ar1_phi=phi)


def holm_bonferroni(pvalues) -> np.ndarray:
    """Holm step-down adjusted p-values, returned in the input order.

    Adjusted values are >= raw values, capped at 1, and monotone
    nondecreasing along the raw-p ordering.
    """
    p = np.asarray(pvalues, dtype=float)
    m = len(p)
    order = np.argsort(p, kind="stable")
    adj = np.empty(m)
    running = 0.0
    for rank, idx in enumerate(order):
        running = max(running, (m - rank) * p[idx])
        adj[idx] = min(running, 1.0)
    return adj


def wilson_ci(successes: int, n: int, conf: float = 0.95) -> tuple:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("n must be positive")
    z = stats.norm.ppf(0.5 + conf / 2.0)
    phat = successes / n
    denom = 1.0 + z ** 2 / n
    center = (phat + z ** 2 / (2 * n)) / denom
    half = z * np.sqrt(phat * (1 - phat) / n + z ** 2 / (4 * n ** 2)) / denom
    return (max(0.0, center - half), min(1.0, center + half))
