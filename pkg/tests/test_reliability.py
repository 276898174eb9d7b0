import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relicov.exceptions import DataValidationError
from relicov.reliability import (
    ItemResponseMatrix,
    item_stats,
    kr20,
    kr21,
    linear_combination_variance,
    reliability_definitional,
    variance_of_mean,
)


def brute_force_kr20(scores: np.ndarray) -> float:
    """Independent transcription of the defining formula, population divisors."""
    n, k = scores.shape
    total = 0.0
    for j in range(k):
        p = sum(scores[i, j] for i in range(n)) / n
        total += p * (1.0 - p)
    sums = [sum(scores[i, :]) for i in range(n)]
    mean_sum = sum(sums) / n
    var = sum((s - mean_sum) ** 2 for s in sums) / n
    return k / (k - 1) * (1.0 - total / var)


class TestItemStats:
    def test_hand_example(self):
        m = ItemResponseMatrix(scores=[[1, 1], [0, 0]])
        stats = item_stats(m)
        assert stats.p == pytest.approx([0.5, 0.5])
        assert stats.sigma_x2 == pytest.approx(1.0)  # sums (2, 0), population divisor

    def test_constant_rows_zero_variance(self):
        stats = item_stats(ItemResponseMatrix(scores=[[1, 1, 1], [1, 1, 1]]))
        assert stats.sigma_x2 == 0.0

    def test_all_correct_column(self):
        stats = item_stats(ItemResponseMatrix(scores=[[1, 0], [1, 1]]))
        assert stats.p[0] == 1.0

    def test_real_valued_rejected(self):
        with pytest.raises(DataValidationError):
            item_stats(ItemResponseMatrix(scores=[[0.5, 1], [0, 1]]))


class TestKr20:
    def test_perfectly_correlated_items(self):
        report = kr20(ItemResponseMatrix(scores=[[1, 1], [0, 0]]))
        assert report.coefficient == pytest.approx(1.0)
        assert report.method == "KR20"

    def test_degenerate_equal_sums(self):
        with pytest.raises(DataValidationError):
            kr20(ItemResponseMatrix(scores=[[1, 0], [0, 1]]))

    def test_matches_brute_force_formula(self, rng):
        scores = (rng.random((100, 10)) < 0.6).astype(float)
        report = kr20(ItemResponseMatrix(scores=scores))
        assert report.coefficient == pytest.approx(brute_force_kr20(scores), abs=1e-12)

    def test_out_of_range_coefficient_flagged_not_clamped(self):
        # anti-correlated items push the coefficient to -1
        scores = [[1, 0], [0, 1], [1, 0], [0, 1], [1, 1], [0, 0]]
        report = kr20(ItemResponseMatrix(scores=scores))
        assert report.coefficient == pytest.approx(-1.0)
        assert report.diagnostics["out_of_range"] is True

    def test_permutation_invariance(self, rng):
        scores = (rng.random((20, 6)) < 0.5).astype(float)
        base = kr20(ItemResponseMatrix(scores=scores)).coefficient
        shuffled = scores[rng.permutation(20)][:, rng.permutation(6)]
        assert kr20(ItemResponseMatrix(scores=shuffled)).coefficient == pytest.approx(
            base, abs=1e-12
        )


class TestKr21:
    def test_hand_example(self):
        report = kr21(ItemResponseMatrix(scores=[[1, 1], [0, 0]]))
        # p_bar = 0.5 -> 2 * (1 - 2*0.25/1.0)
        assert report.coefficient == pytest.approx(1.0)

    def test_equals_kr20_when_difficulties_equal(self, rng):
        # columns are permutations of each other -> equal p_j
        column = np.array([1.0, 1, 0, 1, 0, 0, 1, 0])
        scores = np.column_stack([np.roll(column, s) for s in range(4)])
        a = kr20(ItemResponseMatrix(scores=scores)).coefficient
        b = kr21(ItemResponseMatrix(scores=scores)).coefficient
        assert a == pytest.approx(b, abs=1e-12)

    @given(st.integers(0, 10_000))
    @settings(max_examples=150, deadline=None)
    def test_lower_bounds_kr20(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, 40))
        k = int(rng.integers(2, 12))
        scores = (rng.random((n, k)) < rng.uniform(0.2, 0.8)).astype(float)
        m = ItemResponseMatrix(scores=scores)
        try:
            a = kr20(m).coefficient
        except DataValidationError:
            return  # degenerate sum variance
        assert kr21(m).coefficient <= a + 1e-12


class TestDefinitional:
    def test_error_free(self):
        assert reliability_definitional(1.0, 0.0).coefficient == 1.0

    def test_all_error(self):
        assert reliability_definitional(1.0, 1.0).coefficient == 0.0

    def test_ratio(self):
        assert reliability_definitional(4.0, 1.0).coefficient == pytest.approx(0.75)

    def test_domain_errors(self):
        with pytest.raises(DataValidationError):
            reliability_definitional(1.0, 2.0)
        with pytest.raises(DataValidationError):
            reliability_definitional(0.0, 0.0)

    @given(st.floats(1e-6, 1e6))
    @settings(max_examples=50, deadline=None)
    def test_boundary_values(self, v):
        assert reliability_definitional(v, 0.0).coefficient == 1.0
        assert reliability_definitional(v, v).coefficient == 0.0


class TestVarianceOfMean:
    def test_independent_case(self):
        assert variance_of_mean(1.0, 4, 0.0).var_of_mean == pytest.approx(0.25)

    def test_with_covariance(self):
        # 1/2 + 2*1/4 = 1.0
        assert variance_of_mean(1.0, 2, 1.0).var_of_mean == pytest.approx(1.0)

    def test_perfect_correlation_returns_sigma2(self):
        for sigma2, k in [(1.0, 3), (2.5, 7), (0.3, 2)]:
            cov_sum = k * (k - 1) / 2 * sigma2
            assert variance_of_mean(sigma2, k, cov_sum).var_of_mean == pytest.approx(
                sigma2
            )

    def test_inconsistent_inputs_rejected(self):
        with pytest.raises(DataValidationError):
            variance_of_mean(1.0, 2, -10.0)

    def test_linear_combination_projection(self):
        cov = np.array([[2.0, 0.3], [0.3, 1.0]])
        assert linear_combination_variance([1.0, 0.0], cov) == pytest.approx(2.0)

    def test_linear_combination_matches_quadratic_form(self, rng):
        a = rng.standard_normal((4, 4))
        cov = a @ a.T
        beta = rng.standard_normal(4)
        expected = sum(
            beta[i] * cov[i, j] * beta[j] for i in range(4) for j in range(4)
        )
        assert linear_combination_variance(beta, cov) == pytest.approx(expected)
