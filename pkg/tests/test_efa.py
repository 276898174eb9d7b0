import numpy as np
import pytest

from relicov.core import SampleSet, rng_stream
from relicov.efa import (
    FactorModel,
    correlation_matrix,
    efa_reliability,
    extract_factors,
    rotate,
    varimax,
    varimax_criterion,
)
from relicov.exceptions import DataValidationError


def random_orthogonal(m, rng):
    q, r = np.linalg.qr(rng.standard_normal((m, m)))
    return q * np.sign(np.diag(r))


def compound_symmetry(p, rho):
    r = np.full((p, p), rho)
    np.fill_diagonal(r, 1.0)
    return r


class TestCorrelationMatrix:
    def test_duplicate_columns(self):
        col = np.array([1.0, 2.0, 4.0, -1.0])
        s = SampleSet(rows=np.column_stack([col, col]), mu=np.zeros(2))
        assert correlation_matrix(s)[0, 1] == pytest.approx(1.0)

    def test_anti_correlated(self):
        col = np.array([1.0, -2.0, 0.5])
        s = SampleSet(rows=np.column_stack([col, -col]), mu=np.zeros(2))
        assert correlation_matrix(s)[0, 1] == pytest.approx(-1.0)

    def test_independent_columns_near_zero(self):
        rows = rng_stream(5).standard_normal((100_000, 3))
        r = correlation_matrix(SampleSet(rows=rows, mu=np.zeros(3)))
        off = r[~np.eye(3, dtype=bool)]
        assert np.abs(off).max() < 0.02

    def test_zero_variance_column_named(self):
        rows = np.array([[1.0, 3.0], [2.0, 3.0], [0.0, 3.0]])
        with pytest.raises(DataValidationError, match="column 1"):
            correlation_matrix(SampleSet(rows=rows, mu=np.zeros(2)))


class TestExtractFactors:
    def test_identity_correlation_degenerate(self):
        model = extract_factors(np.eye(4), "kaiser")
        assert np.allclose(model.eigenvalues, 1.0)
        assert model.m == 4
        assert "no_structure" in model.diagnostics

    def test_compound_symmetry_closed_form(self):
        model = extract_factors(compound_symmetry(4, 0.5), "kaiser")
        assert np.allclose(model.eigenvalues, [2.5, 0.5, 0.5, 0.5], atol=1e-10)
        assert model.m == 1

    def test_contribution_equals_eigenvalue(self):
        model = extract_factors(compound_symmetry(5, 0.4), 2)
        assert np.allclose(model.factor_contributions, model.eigenvalues[:2], atol=1e-10)

    def test_trace_preserved(self, rng):
        a = rng.standard_normal((40, 6))
        r = np.corrcoef(a, rowvar=False)
        model = extract_factors(r, "kaiser")
        assert model.eigenvalues.sum() == pytest.approx(6.0, abs=1e-10)

    def test_kaiser_retains_at_least_one(self, rng):
        a = rng.standard_normal((50, 5))
        model = extract_factors(np.corrcoef(a, rowvar=False), "kaiser")
        assert 1 <= model.m <= 5

    def test_fixed_count_bounds(self):
        with pytest.raises(DataValidationError):
            extract_factors(np.eye(3), 4)

    def test_non_unit_diagonal_rejected(self):
        with pytest.raises(DataValidationError):
            extract_factors(np.eye(3) * 2.0)


class TestRotate:
    def _model(self, rng, p=6, m=2):
        a = rng.standard_normal((p, m))
        return FactorModel(loadings=a, eigenvalues=np.ones(p), rotation=np.eye(m))

    def test_identity_rotation(self, rng):
        model = self._model(rng)
        rotated = rotate(model, np.eye(2))
        assert (rotated.loadings == model.loadings).all()

    def test_quarter_turn_swaps_columns(self, rng):
        model = self._model(rng)
        t = np.array([[0.0, -1.0], [1.0, 0.0]])
        rotated = rotate(model, t)
        assert np.allclose(np.abs(rotated.loadings[:, 0]), np.abs(model.loadings[:, 1]))
        assert np.allclose(np.abs(rotated.loadings[:, 1]), np.abs(model.loadings[:, 0]))

    def test_communalities_invariant_under_random_rotations(self, rng):
        model = self._model(rng, p=8, m=3)
        base = model.communalities
        for _ in range(100):
            t = random_orthogonal(3, rng)
            assert np.abs(rotate(model, t).communalities - base).max() < 1e-10

    def test_fitted_common_variance_invariant(self, rng):
        model = self._model(rng, p=5, m=2)
        aat = model.loadings @ model.loadings.T
        t = random_orthogonal(2, rng)
        rotated = rotate(model, t)
        assert np.abs(rotated.loadings @ rotated.loadings.T - aat).max() < 1e-10

    def test_non_orthogonal_rejected(self, rng):
        with pytest.raises(DataValidationError):
            rotate(self._model(rng), np.array([[1.0, 0.5], [0.0, 1.0]]))


class TestVarimax:
    def test_single_factor_unchanged(self, rng):
        model = FactorModel(
            loadings=rng.standard_normal((5, 1)), eigenvalues=np.ones(5), rotation=np.eye(1)
        )
        assert varimax(model) is model

    def test_simple_structure_criterion_already_maximal(self):
        a = np.zeros((6, 2))
        a[:3, 0] = [0.9, 0.8, 0.7]
        a[3:, 1] = [0.6, 0.5, 0.9]
        model = FactorModel(loadings=a, eigenvalues=np.ones(6), rotation=np.eye(2))
        rotated = varimax(model)
        assert varimax_criterion(rotated.loadings) == pytest.approx(
            varimax_criterion(a), abs=1e-12
        )

    def test_criterion_never_decreases(self, rng):
        for _ in range(25):
            a = rng.standard_normal((6, 2))
            model = FactorModel(loadings=a, eigenvalues=np.ones(6), rotation=np.eye(2))
            rotated = varimax(model)
            assert varimax_criterion(rotated.loadings) >= varimax_criterion(a) - 1e-12

    def test_recovers_simple_structure_after_scrambling(self, rng):
        a = np.zeros((8, 2))
        a[:4, 0] = [0.9, 0.85, 0.8, 0.75]
        a[4:, 1] = [0.7, 0.65, 0.8, 0.6]
        scrambled = rotate(
            FactorModel(loadings=a, eigenvalues=np.ones(8), rotation=np.eye(2)),
            random_orthogonal(2, rng),
        )
        recovered = varimax(scrambled)
        assert varimax_criterion(recovered.loadings) == pytest.approx(
            varimax_criterion(a), abs=1e-6
        )


class TestEfaReliability:
    def test_error_free(self):
        model = FactorModel(
            loadings=np.ones((3, 1)), eigenvalues=np.ones(3), rotation=np.eye(1)
        )
        # psi = 1 - 1 = 0 everywhere
        assert efa_reliability(model).coefficient == pytest.approx(1.0)

    def test_zero_loadings(self):
        model = FactorModel(
            loadings=np.zeros((3, 1)), eigenvalues=np.ones(3), rotation=np.eye(1)
        )
        assert efa_reliability(model).coefficient == 0.0

    def test_hand_value(self):
        lam = np.full((4, 1), np.sqrt(0.5))
        model = FactorModel(loadings=lam, eigenvalues=np.ones(4), rotation=np.eye(1))
        # (4*sqrt(.5))^2 = 8, sum psi = 2 -> 0.8
        assert efa_reliability(model).coefficient == pytest.approx(0.8)

    def test_multi_factor_rejected(self, rng):
        model = FactorModel(
            loadings=rng.standard_normal((4, 2)), eigenvalues=np.ones(4), rotation=np.eye(2)
        )
        with pytest.raises(DataValidationError):
            efa_reliability(model)

    def test_heywood_case_clamped_and_flagged(self):
        model = FactorModel(
            loadings=np.array([[1.2], [0.5]]), eigenvalues=np.ones(2), rotation=np.eye(1)
        )
        report = efa_reliability(model)
        assert report.diagnostics["heywood"] == [0]
        assert 0.0 <= report.coefficient <= 1.0
