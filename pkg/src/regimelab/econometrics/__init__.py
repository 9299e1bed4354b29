"""Statistical kernel: regression, causality, resampling, and analyses."""

from .regression import (
    RegressionResult,
    add_constant,
    iv_2sls,
    ols,
    ssr_f_test,
    wald_f_test,
)
from .causality import GrangerReport, adf_test, granger_suite
from .resampling import (
    GapStats,
    PermutationResult,
    gap_stats,
    holm_bonferroni,
    permutation_suite,
    wilson_ci,
)
from .analyses import (
    contrarian_backtest,
    quintile_stratification,
    regime_model_suite,
    residual_on_residual,
    rolling_correlation,
    transition_event_study,
    variance_decomposition,
)

__all__ = [
    "RegressionResult", "add_constant", "iv_2sls", "ols", "ssr_f_test", "wald_f_test",
    "GrangerReport", "adf_test", "granger_suite",
    "GapStats", "PermutationResult", "gap_stats", "holm_bonferroni",
    "permutation_suite", "wilson_ci",
    "contrarian_backtest", "quintile_stratification", "regime_model_suite",
    "residual_on_residual", "rolling_correlation", "transition_event_study",
    "variance_decomposition",
]
