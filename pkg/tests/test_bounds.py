import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wsbm.bounds import (
    ACHIEVABLE,
    BOUNDARY,
    IMPOSSIBLE,
    censored_stat,
    failure_bound,
    log_thm1_failure_bound,
    recovery_regime,
    threshold_C,
    threshold_report,
    thm1_failure_bound,
    thmK_failure_bound,
    verdict,
)
from wsbm.dist import LabelDistribution, ScaledFamily, renyi_half
from wsbm.errors import ValidationError
from wsbm.generate import censored_intensities

FOUR_E_SQUARED = 29.556224395722601
CENSORED_QUARTER = 0.26794919243112270
SUBMATRIX_RATIO = 1.4476482730108394


def direct_thm1(n, I):
    return sum(math.exp(2 * k * (math.log(n / k) + 1) - 2 * k * (n - k) * I) for k in range(1, n // 2 + 1))


def direct_thmK(n, K, I):
    total = 0.0
    for m in range(1, n * K + 1):
        count = min((math.e * n * K * K / m) ** m, float(K) ** (n * K))
        rate = (m * m - n * m) * I if m <= n // 2 else -2 * m * n * I / 9
        total += count * math.exp(rate)
    return total


class TestThm1:
    def test_n2_zero(self):
        assert thm1_failure_bound(2, 0.0) == pytest.approx(FOUR_E_SQUARED, rel=1e-14)

    @pytest.mark.parametrize("I", [0.1, 0.5, 2.0])
    def test_single_term(self, I):
        assert thm1_failure_bound(2, I) == pytest.approx(FOUR_E_SQUARED * math.exp(-2 * I), rel=1e-14)

    @pytest.mark.parametrize("n", [3, 6, 7, 20, 51])
    @pytest.mark.parametrize("I", [0.0, 0.05, 0.3, 1.0])
    def test_matches_direct_sum(self, n, I):
        assert thm1_failure_bound(n, I) == pytest.approx(direct_thm1(n, I), rel=1e-12)

    def test_large_n_stays_finite_in_log_space(self):
        assert math.isfinite(log_thm1_failure_bound(10 ** 5, 0.0))
        assert thm1_failure_bound(10 ** 5, 0.0) == math.inf

    def test_rejects_small_n(self):
        with pytest.raises(ValidationError):
            thm1_failure_bound(1, 0.1)

    @settings(max_examples=100)
    @given(st.integers(2, 300), st.floats(0, 5), st.floats(1e-6, 5))
    def test_decreasing_in_I(self, n, I, dI):
        lo, hi = log_thm1_failure_bound(n, I), log_thm1_failure_bound(n, I + dI)
        assert hi <= lo
        assert thm1_failure_bound(n, I) >= 0.0


class TestThmK:
    def test_n2_K2_zero(self):
        assert thmK_failure_bound(2, 2, 0.0) == pytest.approx(64.0, rel=1e-14)
        first_term = min(2 * math.e * 4, 2.0 ** 4)
        assert first_term == 16.0

    def test_large_I_vanishes(self):
        assert thmK_failure_bound(10, 2, 100.0) < 1e-300

    @pytest.mark.parametrize("n,K", [(2, 3), (5, 2), (7, 3), (10, 4)])
    @pytest.mark.parametrize("I", [0.0, 0.2, 1.5])
    def test_matches_direct_sum(self, n, K, I):
        assert thmK_failure_bound(n, K, I) == pytest.approx(direct_thmK(n, K, I), rel=1e-12)

    def test_strictly_decreasing_on_grid(self):
        for n, K in ((4, 2), (10, 3), (30, 5)):
            values = [thmK_failure_bound(n, K, I) for I in np.linspace(0, 2, 41)]
            positive = [v for v in values if v > 0]
            assert all(a > b for a, b in zip(positive, positive[1:]))

    def test_dispatch(self):
        assert failure_bound(6, 2, 0.4) == thm1_failure_bound(6, 0.4)
        assert failure_bound(6, 3, 0.4) == thmK_failure_bound(6, 3, 0.4)


class TestThreshold:
    def test_examples(self):
        assert threshold_C([2, 3], [2, 3]) == 0.0
        assert threshold_C([9], [1]) == 4.0
        assert threshold_C([4, 1], [1, 4]) == pytest.approx(2.0, rel=1e-15)
        assert threshold_C([1.2], [0.6]) == pytest.approx(0.10294372515228594, rel=1e-14)

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            threshold_C([1, 2], [1])

    def test_verdict_margin(self):
        assert verdict(1.0) == BOUNDARY
        assert verdict(1.0 + 1e-10) == BOUNDARY
        assert verdict(1.0 + 1e-8) == ACHIEVABLE
        assert verdict(1.0 - 1e-8) == IMPOSSIBLE
        assert verdict(1.05, margin=0.1) == BOUNDARY

    def test_report(self):
        fam = ScaledFamily([9], [1], 200)
        rep = threshold_report(fam)
        assert rep.C == 4.0 and rep.verdict == ACHIEVABLE
        assert rep.n_I_over_log_n == pytest.approx(200 * rep.I / math.log(200))
        assert threshold_report(ScaledFamily([1.2], [0.6], 200)).verdict == IMPOSSIBLE

    def test_cauchy_schwarz_and_colour_monotonicity(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            L = int(rng.integers(1, 6))
            a, b = rng.exponential(2.0, L), rng.exponential(2.0, L)
            C = threshold_C(a, b)
            assert C >= (math.sqrt(a.sum()) - math.sqrt(b.sum())) ** 2 - 1e-12
            a2, b2 = rng.exponential(2.0, 2), rng.exponential(2.0, 2)
            assert threshold_C(np.r_[a, a2], np.r_[b, b2]) >= C


class TestCensored:
    def test_equal_flips(self):
        assert censored_stat(100, 0.3, 0.2, 0.2) == 0.0

    def test_extreme_flips(self):
        n = 500
        assert censored_stat(n, math.log(n) / n, 0.0, 1.0) == pytest.approx(2.0, rel=1e-14)

    def test_quarter_flips(self):
        n = 500
        assert censored_stat(n, math.log(n) / n, 0.25, 0.75) == pytest.approx(CENSORED_QUARTER, rel=1e-14)

    def test_range_checks(self):
        with pytest.raises(ValidationError):
            censored_stat(1, 0.5, 0.1, 0.2)
        with pytest.raises(ValidationError):
            censored_stat(10, 1.5, 0.1, 0.2)

    def test_identity_with_threshold(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            n = int(rng.integers(2, 10 ** 6))
            p, q1, q2 = rng.random(3)
            a, b = censored_intensities(n, p, q1, q2)
            assert abs(censored_stat(n, p, q1, q2) - threshold_C(a, b)) <= 1e-12 * max(1.0, threshold_C(a, b))


class TestRegime:
    def test_boundary(self):
        n = 1000
        rep = recovery_regime(math.log(n) / n, n)
        assert rep.n_I_over_log_n == pytest.approx(1.0, rel=1e-14)
        assert rep.verdict == BOUNDARY

    def test_achievable(self):
        n = 1000
        assert recovery_regime(2 * math.log(n) / n, n).verdict == ACHIEVABLE

    def test_gaussian_submatrix(self):
        n, mu = 1000, 0.2
        I = renyi_half(LabelDistribution.gaussian(mu, 1.0), LabelDistribution.gaussian(0.0, 1.0))
        rep = recovery_regime(I, n)
        assert rep.n_I_over_log_n == pytest.approx(SUBMATRIX_RATIO, rel=1e-12)
        assert n * mu * mu / math.log(n) == pytest.approx(4 * SUBMATRIX_RATIO, rel=1e-12)
        assert rep.verdict == ACHIEVABLE
