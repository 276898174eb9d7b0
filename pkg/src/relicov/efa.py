"""Exploratory factor analysis.

Correlation matrices, eigenvalue extraction with the eigenvalue >= 1
retention rule, orthogonal rotation (varimax via pairwise Jacobi
sweeps), and the one-factor omega reliability coefficient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from relicov.core import SampleSet, symmetrize
from relicov.exceptions import DataValidationError
from relicov.reliability import ReliabilityReport

__all__ = [
    "FactorModel",
    "correlation_matrix",
    "extract_factors",
    "rotate",
    "varimax",
    "varimax_criterion",
    "efa_reliability",
]

ORTHO_TOL = 1e-10


@dataclass(frozen=True)
class FactorModel:
    """Loadings, spectrum, and accumulated rotation of an extraction.

    Communalities, per-factor contributions, and uniquenesses are
    derived from the current loadings, so they stay consistent after
    rotation.
    """

    loadings: np.ndarray
    eigenvalues: np.ndarray
    rotation: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        loadings = np.atleast_2d(np.asarray(self.loadings, dtype=np.float64))
        eigenvalues = np.asarray(self.eigenvalues, dtype=np.float64).ravel()
        rotation = np.atleast_2d(np.asarray(self.rotation, dtype=np.float64))
        m = loadings.shape[1]
        if rotation.shape != (m, m):
            raise DataValidationError("rotation must be m x m")
        object.__setattr__(self, "loadings", loadings)
        object.__setattr__(self, "eigenvalues", eigenvalues)
        object.__setattr__(self, "rotation", rotation)

    @property
    def p(self) -> int:
        return self.loadings.shape[0]

    @property
    def m(self) -> int:
        return self.loadings.shape[1]

    @property
    def communalities(self) -> np.ndarray:
        """Per-variable common variance h_i^2 (row sums of squared loadings)."""
        return (self.loadings**2).sum(axis=1)

    @property
    def factor_contributions(self) -> np.ndarray:
        """Per-factor explained variance S_j (column sums of squared loadings)."""
        return (self.loadings**2).sum(axis=0)

    @property
    def uniquenesses(self) -> np.ndarray:
        return 1.0 - self.communalities


def correlation_matrix(s: SampleSet) -> np.ndarray:
    """Pairwise Pearson correlations of the sample columns.

    The diagonal is exactly one; a zero-variance column is rejected
    by index.
    """
    if s.n < 2:
        raise DataValidationError("correlations need at least 2 rows")
    centered = s.rows - s.rows.mean(axis=0)
    sd = centered.std(axis=0)
    zero = np.flatnonzero(sd == 0.0)
    if zero.size:
        raise DataValidationError(f"column {zero[0]} has zero variance")
    r = symmetrize((centered / sd).T @ (centered / sd) / s.n)
    np.fill_diagonal(r, 1.0)
    return np.clip(r, -1.0, 1.0)


def extract_factors(r: np.ndarray, rule: str | int = "kaiser") -> FactorModel:
    """Principal-axis extraction from a correlation matrix.

    ``rule`` is either ``"kaiser"`` (retain eigenvalues >= 1) or an
    integer factor count.  Loadings are eigenvectors scaled by the
    square roots of their eigenvalues, with each column's sign fixed so
    its entry sum is non-negative.
    """
    r = np.asarray(r, dtype=np.float64)
    p = r.shape[0]
    if r.shape != (p, p) or np.abs(r - r.T).max() > 1e-8:
        raise DataValidationError("correlation matrix must be square symmetric")
    if np.abs(np.diag(r) - 1.0).max() > 1e-8:
        raise DataValidationError("correlation matrix must have unit diagonal")
    eigvals, eigvecs = np.linalg.eigh(symmetrize(r))
    if eigvals[0] < -1e-8 * max(1.0, eigvals[-1]):
        raise DataValidationError("correlation matrix is not positive semidefinite")
    order = np.arange(p - 1, -1, -1)  # descending; eigh ties keep input order
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    if rule == "kaiser":
        m = int((eigvals >= 1.0).sum())
        m = max(m, 1)
    else:
        m = int(rule)
        if not 1 <= m <= p:
            raise DataValidationError(f"factor count must be in [1, {p}], got {m}")
    cols = eigvecs[:, :m]
    signs = np.where(cols.sum(axis=0) < 0.0, -1.0, 1.0)
    loadings = cols * signs * np.sqrt(np.clip(eigvals[:m], 0.0, None))
    diagnostics = {"retained": m, "rule": rule}
    if rule == "kaiser" and m == p:
        diagnostics["no_structure"] = "every eigenvalue >= 1; no dimensionality reduction"
    return FactorModel(
        loadings=loadings,
        eigenvalues=eigvals,
        rotation=np.eye(m),
        diagnostics=diagnostics,
    )


def rotate(model: FactorModel, t: np.ndarray) -> FactorModel:
    """Apply an orthogonal rotation to the loadings (A -> A t).

    Communalities are invariant because t preserves row norms.
    """
    t = np.asarray(t, dtype=np.float64)
    m = model.m
    if t.shape != (m, m):
        raise DataValidationError(f"rotation must be {m}x{m}, got {t.shape}")
    if np.abs(t.T @ t - np.eye(m)).max() > ORTHO_TOL:
        raise DataValidationError("rotation matrix is not orthogonal")
    return FactorModel(
        loadings=model.loadings @ t,
        eigenvalues=model.eigenvalues,
        rotation=model.rotation @ t,
        diagnostics=dict(model.diagnostics),
    )


def varimax_criterion(loadings: np.ndarray) -> float:
    """Raw varimax objective: sum over factors of the variance of squared loadings."""
    a2 = np.asarray(loadings, dtype=np.float64) ** 2
    p = a2.shape[0]
    return float((a2**2).sum() / p - ((a2.sum(axis=0) / p) ** 2).sum())


def varimax(model: FactorModel, max_sweeps: int = 100, tol: float = 1e-8) -> FactorModel:
    """Varimax rotation via pairwise Jacobi sweeps.

    Each pair rotation maximizes the criterion for that pair in closed
    form, so the objective is non-decreasing; sweeps stop once a full
    pass gains less than ``tol``.  A single-factor model is returned
    unchanged.
    """
    if model.m < 2:
        return model
    a = model.loadings.copy()
    p, m = a.shape
    t = np.eye(m)
    value = varimax_criterion(a)
    for _ in range(max_sweeps):
        for i in range(m - 1):
            for j in range(i + 1, m):
                x, y = a[:, i], a[:, j]
                u = x * x - y * y
                v = 2.0 * x * y
                su, sv = u.sum(), v.sum()
                num = 2.0 * (u * v).sum() - 2.0 * su * sv / p
                den = (u * u - v * v).sum() - (su * su - sv * sv) / p
                phi = 0.25 * math.atan2(num, den)
                if abs(phi) < 1e-14:
                    continue
                c, s = math.cos(phi), math.sin(phi)
                g = np.array([[c, -s], [s, c]])
                a[:, [i, j]] = a[:, [i, j]] @ g
                t[:, [i, j]] = t[:, [i, j]] @ g
        new_value = varimax_criterion(a)
        if new_value - value <= tol:
            value = new_value
            break
        value = new_value
    # re-orthonormalize the accumulated Givens product against drift
    q, r = np.linalg.qr(t)
    t = q * np.sign(np.diag(r))
    return rotate(model, t)


def efa_reliability(model: FactorModel) -> ReliabilityReport:
    """Omega reliability of the sum score under a one-factor model.

    omega = (sum of loadings)^2 / ((sum of loadings)^2 + sum of
    uniquenesses).  Negative uniquenesses (Heywood cases) are clamped
    to zero and flagged.
    """
    if model.m != 1:
        raise DataValidationError(
            f"omega needs exactly one retained factor, got {model.m}"
        )
    lam = model.loadings[:, 0]
    psi = model.uniquenesses
    diagnostics = {}
    if (psi < 0.0).any():
        diagnostics["heywood"] = [int(i) for i in np.flatnonzero(psi < 0.0)]
        psi = np.clip(psi, 0.0, None)
    common = float(lam.sum()) ** 2
    denom = common + float(psi.sum())
    if denom <= 0.0:
        raise DataValidationError("degenerate model: zero total variance")
    return ReliabilityReport(
        coefficient=common / denom, method="EFA_OMEGA", diagnostics=diagnostics
    )
