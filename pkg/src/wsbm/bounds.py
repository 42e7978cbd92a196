"""Closed-form failure bounds and threshold statistics.

All sums are evaluated in log space. Finite-n verdicts compare a statistic
against its asymptotic threshold; they are indicators, not guarantees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .dist import ScaledFamily, make_scaled_discrete, renyi_half, sqrt_gap_sum
from .errors import ValidationError

DEFAULT_MARGIN = 1e-9

ACHIEVABLE = "achievable"
IMPOSSIBLE = "impossible"
BOUNDARY = "boundary"


def verdict(stat: float, margin: float = DEFAULT_MARGIN) -> str:
    """Compare a statistic with the threshold 1."""
    if stat > 1.0 + margin:
        return ACHIEVABLE
    if stat < 1.0 - margin:
        return IMPOSSIBLE
    return BOUNDARY


@dataclass(frozen=True)
class ThresholdReport:
    C: float | None
    I: float | None
    n_I_over_log_n: float | None
    verdict: str


def _exp(logv: float) -> float:
    try:
        return math.exp(logv)
    except OverflowError:
        return math.inf


def log_thm1_failure_bound(n: int, I: float) -> float:
    if n < 2:
        raise ValidationError("the two-community bound needs n >= 2")
    if I < 0:
        raise ValidationError("I must be non-negative")
    k = np.arange(1, n // 2 + 1, dtype=np.float64)
    terms = 2 * k * (np.log(n / k) + 1.0) - 2 * k * (n - k) * I
    return float(logsumexp(terms))


def thm1_failure_bound(n: int, I: float) -> float:
    """Two-community bound ``sum_{k<=n/2} exp(2k(log(n/k)+1) - 2k(n-k)I)``.

    ``n/2`` is floored for odd ``n``. Values above 1 are vacuous but still returned.
    """
    return _exp(log_thm1_failure_bound(n, I))


def log_thmK_failure_bound(n: int, K: int, I: float) -> float:
    if n < 2 or K < 2:
        raise ValidationError("the K-community bound needs n >= 2 and K >= 2")
    if I < 0:
        raise ValidationError("I must be non-negative")
    m = np.arange(1, n * K + 1, dtype=np.float64)
    # log of min{(e n K^2 / m)^m, K^(nK)}
    log_count = np.minimum(m * (1.0 + math.log(n) + 2 * math.log(K) - np.log(m)), n * K * math.log(K))
    half = n // 2
    exponent = np.where(m <= half, (-n * m + m * m) * I, -2.0 * m * n * I / 9.0)
    return float(logsumexp(log_count + exponent))


def thmK_failure_bound(n: int, K: int, I: float) -> float:
    """K-community bound: small-``m`` terms decay like ``e^{(m^2 - nm) I}``, the rest like ``e^{-2mnI/9}``."""
    return _exp(log_thmK_failure_bound(n, K, I))


def threshold_C(a: Sequence[float], b: Sequence[float]) -> float:
    """``sum_l (sqrt(a_l) - sqrt(b_l))**2``; exact recovery threshold sits at 1."""
    return sqrt_gap_sum(a, b)


def censored_stat(n: int, p: float, q1: float, q2: float) -> float:
    """``(p n / log n) [(sqrt(1-q1) - sqrt(1-q2))^2 + (sqrt(q1) - sqrt(q2))^2]``."""
    if n < 2:
        raise ValidationError("censored_stat needs n >= 2")
    for name, x in (("p", p), ("q1", q1), ("q2", q2)):
        if not 0.0 <= x <= 1.0:
            raise ValidationError(f"{name} must lie in [0, 1], got {x}")
    bracket = (math.sqrt(1 - q1) - math.sqrt(1 - q2)) ** 2 + (math.sqrt(q1) - math.sqrt(q2)) ** 2
    return p * n / math.log(n) * bracket


def recovery_regime(I: float, n: int, margin: float = DEFAULT_MARGIN) -> ThresholdReport:
    """Report ``n I / log n`` against 1 (I only; ``C`` is left unset)."""
    if n < 2:
        raise ValidationError("recovery_regime needs n >= 2")
    ratio = n * I / math.log(n)
    return ThresholdReport(C=None, I=I, n_I_over_log_n=ratio, verdict=verdict(ratio, margin))


def threshold_report(fam: ScaledFamily, margin: float = DEFAULT_MARGIN) -> ThresholdReport:
    """Full report for a scaled family; the verdict is read from ``C``."""
    C = threshold_C(fam.a, fam.b)
    p, q = make_scaled_discrete(fam)
    I = renyi_half(p, q)
    ratio = fam.n * I / math.log(fam.n) if fam.n >= 2 else math.nan
    return ThresholdReport(C=C, I=I, n_I_over_log_n=ratio, verdict=verdict(C, margin))


def failure_bound(n: int, K: int, I: float) -> float:
    """Failure bound matching ``K``: the two-community sum for ``K == 2``, else the K-community one."""
    return thm1_failure_bound(n, I) if K == 2 else thmK_failure_bound(n, K, I)
