"""Shared numerical primitives.

Symmetric-matrix handling, definiteness checks, AR(1) basis generation,
seeded multivariate-normal sampling, and the known-mean scatter matrix
that the covariance-structure estimators consume.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from relicov.exceptions import DataValidationError, NumericalError

__all__ = [
    "SpdVerdict",
    "SampleSet",
    "ScatterMatrix",
    "rng_stream",
    "symmetrize",
    "ar1_matrix",
    "validate_spd",
    "mvn_sample",
    "scatter_matrix",
]

SPD_TOL = 1e-10  # relative to the largest eigenvalue magnitude


class SpdVerdict(enum.Enum):
    SPD = "spd"
    PSD_SINGULAR = "psd-singular"
    INDEFINITE = "indefinite"


def rng_stream(seed: int, index: int = 0) -> np.random.Generator:
    """Deterministic PCG64 generator for ``seed``, substream ``index``.

    Streams with distinct indices are statistically independent (numpy
    SeedSequence spawn keys), so parallel workers can each take their
    own index without coordination.
    """
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),)))
    )


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Return (m + m.T) / 2, which is exactly symmetric in floating point."""
    m = np.asarray(m, dtype=np.float64)
    return (m + m.T) / 2.0


def _check_square_symmetric(m: np.ndarray, what: str = "matrix") -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DataValidationError(f"{what} must be square, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise DataValidationError(f"{what} contains non-finite entries")
    scale = np.abs(m).max() if m.size else 0.0
    if np.abs(m - m.T).max() > 1e-8 * max(scale, 1.0):
        raise DataValidationError(f"{what} is not symmetric")
    return symmetrize(m)


@dataclass(frozen=True)
class SampleSet:
    """n observations of a dim-variate quantity with a known mean."""

    rows: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        rows = np.atleast_2d(np.asarray(self.rows, dtype=np.float64))
        mu = np.asarray(self.mu, dtype=np.float64).ravel()
        if rows.shape[0] < 1:
            raise DataValidationError("SampleSet needs at least one row")
        if rows.shape[1] != mu.shape[0]:
            raise DataValidationError(
                f"row length {rows.shape[1]} does not match mean length {mu.shape[0]}"
            )
        if not (np.isfinite(rows).all() and np.isfinite(mu).all()):
            raise DataValidationError("SampleSet contains non-finite values")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "mu", mu)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True)
class ScatterMatrix:
    """Known-mean second-moment matrix C = (1/n) sum (x - mu)(x - mu)^T."""

    c: np.ndarray
    n_used: int

    def __post_init__(self):
        c = _check_square_symmetric(self.c, "scatter matrix")
        object.__setattr__(self, "c", c)

    @property
    def dim(self) -> int:
        return self.c.shape[0]


def ar1_matrix(d: int, rho: float) -> np.ndarray:
    """First-order autoregressive matrix with entries rho^|i-j|.

    The diagonal is exactly one and the result is positive definite for
    every |rho| < 1.
    """
    if d < 1:
        raise DataValidationError("dimension must be >= 1")
    if not abs(rho) < 1.0:
        raise DataValidationError(
            f"ar1_matrix requires |rho| < 1, got {rho} (matrix may be singular or indefinite)"
        )
    idx = np.arange(d)
    out = np.asarray(rho, dtype=np.float64) ** np.abs(idx[:, None] - idx[None, :])
    np.fill_diagonal(out, 1.0)
    return out


def validate_spd(m: np.ndarray, tol: float = SPD_TOL) -> SpdVerdict:
    """Classify a symmetric matrix as SPD, PSD-singular, or indefinite.

    The decision compares the smallest eigenvalue against ``tol`` times
    the largest eigenvalue magnitude, which absorbs double-precision
    eigensolver noise.
    """
    m = _check_square_symmetric(m)
    eigvals = np.linalg.eigvalsh(m)
    lo, hi = eigvals[0], np.abs(eigvals).max()
    thresh = tol * hi
    if lo > thresh:
        return SpdVerdict.SPD
    if lo >= -thresh:
        return SpdVerdict.PSD_SINGULAR
    return SpdVerdict.INDEFINITE


def mvn_sample(
    mu: np.ndarray,
    sigma: np.ndarray,
    n: int,
    rng: np.random.Generator,
) -> SampleSet:
    """Draw n multivariate-normal vectors via the lower Cholesky factor.

    ``sigma`` must be strictly positive definite; draws are x = mu + L z
    with z standard normal, so results are deterministic for a given
    generator state.
    """
    mu = np.asarray(mu, dtype=np.float64).ravel()
    sigma = _check_square_symmetric(sigma, "covariance")
    if sigma.shape[0] != mu.shape[0]:
        raise DataValidationError("mean and covariance dimensions differ")
    if n < 1:
        raise DataValidationError("sample count must be >= 1")
    verdict = validate_spd(sigma)
    if verdict is not SpdVerdict.SPD:
        raise NumericalError(f"covariance is not SPD (verdict: {verdict.value})")
    lower = np.linalg.cholesky(sigma)
    z = rng.standard_normal((n, mu.shape[0]))
    return SampleSet(rows=mu + z @ lower.T, mu=mu)


def scatter_matrix(s: SampleSet) -> ScatterMatrix:
    """Known-mean scatter matrix with divisor n.

    The divisor is n (not n - 1) because the mean is supplied, not
    estimated.  The output is positive semidefinite by construction.
    """
    centered = s.rows - s.mu
    c = centered.T @ centered / s.n
    return ScatterMatrix(c=symmetrize(c), n_used=s.n)
