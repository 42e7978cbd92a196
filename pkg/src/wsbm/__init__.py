"""Weighted stochastic block models: generation, maximum-likelihood recovery,
Renyi-divergence thresholds, failure bounds and Monte Carlo experiments."""

from .bounds import (
    ThresholdReport,
    censored_stat,
    recovery_regime,
    threshold_C,
    threshold_report,
    thm1_failure_bound,
    thmK_failure_bound,
)
from .dist import (
    LabelDistribution,
    ScaledFamily,
    WeightTable,
    bhattacharyya,
    edge_weights,
    llr_table,
    make_scaled_discrete,
    mgf,
    renyi_asymptotic,
    renyi_half,
)
from .errors import InfiniteDivergenceError, InstanceTooLargeError, ValidationError
from .generate import (
    Assignment,
    ModelSpec,
    WeightedGraph,
    censored_model,
    generate_wsbm,
    scaled_model,
    submatrix_model,
)
from .ml import MLResult, exact_ml, hamming_mod_perm, local_search_ml, score, swap_certificate
from .montecarlo import SweepRow, TrialConfig, estimate_failure, run_trial, sweep

__version__ = "0.1.0"
