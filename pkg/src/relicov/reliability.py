"""Classical reliability coefficients for scored test data.

KR20/KR21 for binary item matrices, the definitional error-variance
ratio, and the variance of a mean with explicit covariance terms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from relicov.exceptions import DataValidationError

__all__ = [
    "METHODS",
    "ReliabilityReport",
    "ItemResponseMatrix",
    "ItemStats",
    "MeanVarianceDecomposition",
    "item_stats",
    "kr20",
    "kr21",
    "reliability_definitional",
    "variance_of_mean",
    "linear_combination_variance",
]

METHODS = ("KR20", "KR21", "DEFINITIONAL", "EFA_OMEGA", "COVMLE", "ICC")


@dataclass(frozen=True)
class ReliabilityReport:
    """A reliability coefficient with its estimation method and notes."""

    coefficient: float
    method: str
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise DataValidationError(f"unknown method {self.method!r}")
        if not np.isfinite(self.coefficient):
            raise DataValidationError("coefficient must be finite")


@dataclass(frozen=True)
class ItemResponseMatrix:
    """n subjects by k items score table.

    ``kind`` is ``"binary"`` when every score is 0 or 1, else ``"real"``.
    """

    scores: np.ndarray
    kind: str = "auto"

    def __post_init__(self):
        scores = np.atleast_2d(np.asarray(self.scores, dtype=np.float64))
        if scores.shape[0] < 2 or scores.shape[1] < 2:
            raise DataValidationError(
                f"need at least 2 subjects and 2 items, got shape {scores.shape}"
            )
        if not np.isfinite(scores).all():
            raise DataValidationError("scores contain missing or non-finite values")
        is_binary = bool(np.isin(scores, (0.0, 1.0)).all())
        kind = self.kind
        if kind == "auto":
            kind = "binary" if is_binary else "real"
        elif kind == "binary" and not is_binary:
            raise DataValidationError("kind='binary' but scores are not all 0/1")
        elif kind not in ("binary", "real"):
            raise DataValidationError(f"unknown kind {self.kind!r}")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "kind", kind)

    @property
    def n(self) -> int:
        return self.scores.shape[0]

    @property
    def k(self) -> int:
        return self.scores.shape[1]


@dataclass(frozen=True)
class ItemStats:
    p: np.ndarray
    p_bar: float
    sigma_x2: float


@dataclass(frozen=True)
class MeanVarianceDecomposition:
    k: int
    sigma2: float
    cov_sum: float
    var_of_mean: float


def item_stats(m: ItemResponseMatrix, sample_variance: bool = False) -> ItemStats:
    """Item proportions correct and the variance of the sum scores.

    ``sigma_x2`` uses the population divisor n by default so it sits on
    the same convention as the item variances p(1-p); pass
    ``sample_variance=True`` for the n-1 divisor.
    """
    if m.kind != "binary":
        raise DataValidationError("item proportions need a binary score matrix")
    p = m.scores.mean(axis=0)
    sums = m.scores.sum(axis=1)
    sigma_x2 = float(sums.var(ddof=1 if sample_variance else 0))
    return ItemStats(p=p, p_bar=float(p.mean()), sigma_x2=sigma_x2)


def _kr_report(m: ItemResponseMatrix, item_var_sum: float, stats: ItemStats, method: str):
    k = m.k
    if stats.sigma_x2 <= 0.0:
        raise DataValidationError(
            f"{method} undefined: sum-score variance is zero (all subjects identical)"
        )
    coef = k / (k - 1.0) * (1.0 - item_var_sum / stats.sigma_x2)
    diagnostics = {"k": k, "n": m.n, "sigma_x2": stats.sigma_x2}
    if not 0.0 <= coef <= 1.0:
        # reported unclamped; clamping would hide data problems
        diagnostics["out_of_range"] = True
    return ReliabilityReport(coefficient=float(coef), method=method, diagnostics=diagnostics)


def kr20(m: ItemResponseMatrix, sample_variance: bool = False) -> ReliabilityReport:
    """Kuder-Richardson formula 20 for a binary item matrix."""
    stats = item_stats(m, sample_variance=sample_variance)
    item_var_sum = float(np.sum(stats.p * (1.0 - stats.p)))
    if sample_variance:
        item_var_sum *= m.n / (m.n - 1.0)
    return _kr_report(m, item_var_sum, stats, "KR20")


def kr21(m: ItemResponseMatrix, sample_variance: bool = False) -> ReliabilityReport:
    """Kuder-Richardson formula 21; a lower bound for KR20.

    Equals KR20 exactly when every item has the same proportion
    correct.
    """
    stats = item_stats(m, sample_variance=sample_variance)
    item_var_sum = m.k * stats.p_bar * (1.0 - stats.p_bar)
    if sample_variance:
        item_var_sum *= m.n / (m.n - 1.0)
    return _kr_report(m, item_var_sum, stats, "KR21")


def reliability_definitional(v_x: float, sigma_eps2: float) -> ReliabilityReport:
    """The fraction of observed-score variance that is not error."""
    if not v_x > 0.0:
        raise DataValidationError(f"observed variance must be positive, got {v_x}")
    if sigma_eps2 < 0.0:
        raise DataValidationError(f"error variance must be >= 0, got {sigma_eps2}")
    if sigma_eps2 > v_x:
        raise DataValidationError(
            f"error variance {sigma_eps2} exceeds observed variance {v_x}"
        )
    return ReliabilityReport(
        coefficient=1.0 - sigma_eps2 / v_x,
        method="DEFINITIONAL",
        diagnostics={"v_x": v_x, "sigma_eps2": sigma_eps2},
    )


def variance_of_mean(sigma2: float, k: int, cov_sum: float) -> MeanVarianceDecomposition:
    """Variance of the mean of k equi-variance variables with covariances.

    ``cov_sum`` is the sum of Cov(x_i, x_j) over pairs i < j; the result
    is sigma2/k + (2/k^2) * cov_sum.
    """
    if k < 1:
        raise DataValidationError("k must be >= 1")
    if sigma2 < 0.0:
        raise DataValidationError("sigma2 must be >= 0")
    var = sigma2 / k + 2.0 * cov_sum / (k * k)
    if var < 0.0:
        raise DataValidationError(
            f"cov_sum={cov_sum} implies a negative variance ({var}); "
            "no covariance matrix is consistent with these inputs"
        )
    return MeanVarianceDecomposition(k=k, sigma2=sigma2, cov_sum=cov_sum, var_of_mean=var)


def linear_combination_variance(beta: np.ndarray, cov: np.ndarray) -> float:
    """Var(beta . x) = beta^T cov beta for a supplied covariance matrix."""
    beta = np.asarray(beta, dtype=np.float64).ravel()
    cov = np.asarray(cov, dtype=np.float64)
    if cov.shape != (beta.size, beta.size):
        raise DataValidationError(
            f"covariance shape {cov.shape} does not match {beta.size} weights"
        )
    return float(beta @ cov @ beta)
