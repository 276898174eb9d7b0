import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relicov.core import (
    SampleSet,
    SpdVerdict,
    ar1_matrix,
    mvn_sample,
    rng_stream,
    scatter_matrix,
    validate_spd,
)
from relicov.exceptions import DataValidationError, NumericalError


class TestAr1Matrix:
    def test_decay_entries(self):
        m = ar1_matrix(5, 0.9)
        assert m[0, 1] == pytest.approx(0.9)
        assert m[0, 2] == pytest.approx(0.81)
        assert (np.diag(m) == 1.0).all()

    def test_zero_rho_is_identity(self):
        assert (ar1_matrix(3, 0.0) == np.eye(3)).all()

    def test_two_by_two(self):
        assert np.allclose(ar1_matrix(2, 0.6), [[1.0, 0.6], [0.6, 1.0]])

    @pytest.mark.parametrize("rho", [1.0, -1.0, 1.5])
    def test_unit_rho_rejected(self, rho):
        with pytest.raises(DataValidationError):
            ar1_matrix(4, rho)

    @given(st.integers(1, 50), st.floats(-0.99, 0.99))
    @settings(max_examples=60, deadline=None)
    def test_exact_symmetry_and_unit_diagonal(self, d, rho):
        m = ar1_matrix(d, rho)
        assert (m == m.T).all()
        assert (np.diag(m) == 1.0).all()
        assert validate_spd(m) is SpdVerdict.SPD


class TestValidateSpd:
    def test_identity_is_spd(self):
        assert validate_spd(np.eye(3)) is SpdVerdict.SPD

    def test_rank_one_is_psd_singular(self):
        # eigenvalues 2 and 0
        assert validate_spd(np.ones((2, 2))) is SpdVerdict.PSD_SINGULAR

    def test_indefinite(self):
        # hand eigendecomposition: eigenvalues 3 and -1
        assert validate_spd(np.array([[1.0, 2.0], [2.0, 1.0]])) is SpdVerdict.INDEFINITE

    def test_non_finite_rejected(self):
        with pytest.raises(DataValidationError):
            validate_spd(np.array([[np.nan, 0.0], [0.0, 1.0]]))

    def test_asymmetric_rejected(self):
        with pytest.raises(DataValidationError):
            validate_spd(np.array([[1.0, 0.5], [0.0, 1.0]]))


class TestMvnSample:
    def test_large_sample_covariance_close_to_identity(self):
        s = mvn_sample(np.zeros(2), np.eye(2), 100_000, rng_stream(1))
        emp = s.rows.T @ s.rows / s.n
        assert np.abs(emp - np.eye(2)).max() < 0.05

    def test_degenerate_covariance_rejected(self):
        with pytest.raises(NumericalError):
            mvn_sample(np.array([5.0]), np.array([[0.0]]), 10, rng_stream(0))

    def test_equal_seeds_bit_identical(self):
        sigma = ar1_matrix(4, 0.5)
        a = mvn_sample(np.zeros(4), sigma, 100, rng_stream(9, 3))
        b = mvn_sample(np.zeros(4), sigma, 100, rng_stream(9, 3))
        assert (a.rows == b.rows).all()

    def test_substreams_differ(self):
        a = mvn_sample(np.zeros(2), np.eye(2), 50, rng_stream(9, 0))
        b = mvn_sample(np.zeros(2), np.eye(2), 50, rng_stream(9, 1))
        assert not np.allclose(a.rows, b.rows)

    def test_demo_scenario_scatter_within_five_standard_errors(self):
        # each scatter entry is a mean of n products whose SE we bound by
        # sqrt((sii*sjj + sij^2)/n), the Gaussian fourth-moment formula
        bases = [ar1_matrix(5, r) for r in (0.9, 0.6, 0.3)]
        sigma = 0.1 * bases[0] + 0.2 * bases[1] + 0.3 * bases[2]
        n = 100_000
        s = mvn_sample(np.zeros(5), sigma, n, rng_stream(11))
        c = scatter_matrix(s).c
        se = np.sqrt((np.outer(np.diag(sigma), np.diag(sigma)) + sigma**2) / n)
        assert (np.abs(c - sigma) < 5.0 * se).all()


class TestScatterMatrix:
    def test_single_row_at_the_mean_is_zero(self):
        s = SampleSet(rows=[[1.0, 2.0]], mu=[1.0, 2.0])
        assert (scatter_matrix(s).c == 0.0).all()

    def test_two_opposite_scalars(self):
        s = SampleSet(rows=[[1.0], [-1.0]], mu=[0.0])
        assert scatter_matrix(s).c[0, 0] == pytest.approx(1.0)

    def test_matches_direct_summation_oracle(self, rng):
        rows = rng.standard_normal((3, 2))
        mu = rng.standard_normal(2)
        expected = np.zeros((2, 2))
        for row in rows:  # independent brute-force accumulation
            dev = row - mu
            expected += np.outer(dev, dev)
        expected /= 3
        got = scatter_matrix(SampleSet(rows=rows, mu=mu)).c
        assert np.allclose(got, expected, atol=1e-12)

    def test_output_is_psd(self, rng):
        for n, d in [(2, 5), (50, 3), (1, 4)]:
            s = SampleSet(rows=rng.standard_normal((n, d)), mu=np.zeros(d))
            c = scatter_matrix(s).c
            eigvals = np.linalg.eigvalsh(c)
            assert eigvals[0] >= -1e-10 * max(1.0, eigvals[-1])

    def test_dimension_mismatch(self):
        with pytest.raises(DataValidationError):
            SampleSet(rows=[[1.0, 2.0]], mu=[0.0])
