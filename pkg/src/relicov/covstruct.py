"""Maximum-likelihood estimation for linearly structured covariances.

The covariance is constrained to Sigma = sum_g sigma_g G_g with known
symmetric PSD bases G_g.  Coefficients are estimated by iterating the
likelihood stationarity conditions: at each step the linear system

    A[g,f] = tr(Sigma^-1 G_g Sigma^-1 G_f),   b[g] = tr(Sigma^-1 G_g Sigma^-1 C)

is rebuilt at the current Sigma and solved for the next coefficient
vector.  An extension estimates an additional unknown PSD component
G_0 = F F^T of fixed rank by alternating the coefficient solve with
backtracking gradient ascent on F; both steps are damped so the
log-likelihood never decreases.

GLS estimation of mean coefficients under a known covariance and the
mapping from fitted components to a reliability coefficient live here
too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from relicov.core import SpdVerdict, ScatterMatrix, symmetrize, validate_spd
from relicov.exceptions import (
    DataValidationError,
    IllConditionedError,
    NumericalError,
)
from relicov.reliability import ReliabilityReport

__all__ = [
    "CovarianceStructure",
    "GlsDesign",
    "EstimationResult",
    "FactorComponentResult",
    "assemble_sigma",
    "gls_beta",
    "trace_system",
    "estimate_sigma",
    "estimate_with_unknown_g0",
    "stationarity_residual",
    "reliability_from_components",
]

COND_LIMIT = 1e12
JITTER_FRAC = 1e-10  # one-shot diagonal jitter, relative to mean diagonal
DEFAULT_TOL = 1e-3  # step-norm convergence threshold of the coefficient iteration
DEFAULT_MAX_ITER = 1000
FLOOR_FRAC = 1e-8  # negative coefficients are clamped to FLOOR_FRAC * tr(C)/d
ARMIJO_C1 = 1e-4
BACKTRACK_SHRINK = 0.5
MAX_BACKTRACKS = 60


def _check_bases(bases, dim=None):
    out = []
    for i, g in enumerate(bases):
        g = np.asarray(g, dtype=np.float64)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise DataValidationError(f"basis {i} must be square, got {g.shape}")
        if dim is None:
            dim = g.shape[0]
        elif g.shape[0] != dim:
            raise DataValidationError(
                f"basis {i} has dimension {g.shape[0]}, expected {dim}"
            )
        if np.abs(g - g.T).max() > 1e-8 * max(1.0, np.abs(g).max()):
            raise DataValidationError(f"basis {i} is not symmetric")
        out.append(symmetrize(g))
    if not out:
        raise DataValidationError("need at least one basis matrix")
    return out, dim


@dataclass(frozen=True)
class CovarianceStructure:
    """Basis matrices G_0..G_m with coefficients sigma_0..sigma_m."""

    bases: tuple
    coefficients: np.ndarray

    def __post_init__(self):
        bases, _ = _check_bases(self.bases)
        coeffs = np.asarray(self.coefficients, dtype=np.float64).ravel()
        if coeffs.size != len(bases):
            raise DataValidationError(
                f"{len(bases)} bases but {coeffs.size} coefficients"
            )
        for i, g in enumerate(bases):
            if validate_spd(g) is SpdVerdict.INDEFINITE:
                raise DataValidationError(f"basis {i} is indefinite")
        object.__setattr__(self, "bases", tuple(bases))
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def dim(self) -> int:
        return self.bases[0].shape[0]


@dataclass(frozen=True)
class GlsDesign:
    """Mean regressors Z_1..Z_r, stored as the columns of a d x r matrix."""

    regressors: np.ndarray

    def __post_init__(self):
        z = np.atleast_2d(np.asarray(self.regressors, dtype=np.float64))
        if z.shape[0] < z.shape[1]:
            raise DataValidationError("more regressors than dimensions")
        if np.linalg.matrix_rank(z) < z.shape[1]:
            raise DataValidationError("regressors are linearly dependent")
        object.__setattr__(self, "regressors", z)

    @property
    def r(self) -> int:
        return self.regressors.shape[1]


@dataclass(frozen=True)
class EstimationResult:
    """Outcome of the coefficient iteration."""

    sigma_hat: np.ndarray
    iterations: int
    residual: float
    converged: bool
    projected: tuple
    sigma_matrix: np.ndarray
    bases: tuple
    history: tuple = ()  # per-iteration step norms


@dataclass(frozen=True)
class FactorComponentResult:
    """Outcome of the unknown-G_0 alternating estimator."""

    f_hat: np.ndarray
    sigma_hat: np.ndarray
    objective_trace: np.ndarray
    converged: bool
    cycles: int
    sigma_matrix: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def assemble_sigma(s: CovarianceStructure) -> np.ndarray:
    """Dense Sigma = sum_g sigma_g G_g; exactly symmetric by construction."""
    return _combine(s.bases, s.coefficients)


def _combine(bases, coeffs) -> np.ndarray:
    out = np.zeros_like(bases[0])
    for c, g in zip(coeffs, bases):
        out += c * g
    return out


def _spd_solve_factory(sigma: np.ndarray):
    """Cholesky-based solver with a single documented jitter retry.

    Returns (solve, logdet, chol_lower).  Raises NumericalError when the
    matrix stays non-positive-definite after the jitter.
    """
    d = sigma.shape[0]
    try:
        lower = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        jitter = JITTER_FRAC * float(np.mean(np.diag(sigma)))
        try:
            lower = np.linalg.cholesky(sigma + jitter * np.eye(d))
        except np.linalg.LinAlgError:
            raise NumericalError(
                "covariance iterate is singular even after diagonal jitter"
            ) from None

    def solve(rhs):
        y = np.linalg.solve(lower, rhs)
        return np.linalg.solve(lower.T, y)

    logdet = 2.0 * float(np.log(np.diag(lower)).sum())
    return solve, logdet, lower


def gls_beta(design: GlsDesign, sigma: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Generalized least squares coefficients for a known covariance.

    Solves (Z^T Sigma^-1 Z) beta = Z^T Sigma^-1 x through Cholesky
    factorization; Sigma is never inverted explicitly.  The solution is
    invariant under rescaling Sigma by a positive constant.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64).ravel()
    z = design.regressors
    if sigma.shape != (x.size, x.size) or z.shape[0] != x.size:
        raise DataValidationError("dimension mismatch between design, sigma, and x")
    solve, _, _ = _spd_solve_factory(sigma)
    w = solve(z)
    gram = symmetrize(z.T @ w)
    rhs = w.T @ x
    try:
        return np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        raise DataValidationError("regressors are collinear under Sigma^-1") from None


def trace_system(sigma: np.ndarray, bases, c: ScatterMatrix | np.ndarray):
    """The linear system of the likelihood stationarity conditions.

    A[g, f] = tr(Sigma^-1 G_g Sigma^-1 G_f) and
    b[g] = tr(Sigma^-1 G_g Sigma^-1 C).  A is a Gram matrix in the
    Sigma^-1-weighted inner product, hence symmetric PSD.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    bases, dim = _check_bases(bases, sigma.shape[0])
    c_mat = c.c if isinstance(c, ScatterMatrix) else np.asarray(c, dtype=np.float64)
    if c_mat.shape != sigma.shape:
        raise DataValidationError("scatter matrix dimension mismatch")
    eigvals = np.linalg.eigvalsh(sigma)
    if eigvals[0] <= 0.0 or eigvals[-1] / eigvals[0] > COND_LIMIT:
        cond = math.inf if eigvals[0] <= 0.0 else eigvals[-1] / eigvals[0]
        raise IllConditionedError("covariance iterate is near-singular", cond)
    solve, _, _ = _spd_solve_factory(sigma)
    m = len(bases)
    mats = [solve(g) for g in bases]  # Sigma^-1 G_g
    mc = solve(c_mat)  # Sigma^-1 C
    a = np.empty((m, m))
    b = np.empty(m)
    for g in range(m):
        for f in range(g, m):
            a[g, f] = a[f, g] = float((mats[g] * mats[f].T).sum())
        b[g] = float((mats[g] * mc.T).sum())
    return symmetrize(a), b


def _default_init(c_mat: np.ndarray, bases) -> np.ndarray:
    """Equal-share heuristic: sigma_g = tr(C) / (m * tr(G_g))."""
    tr_c = float(np.trace(c_mat))
    m = len(bases)
    init = np.empty(m)
    for g, basis in enumerate(bases):
        tr_g = float(np.trace(basis))
        if tr_g <= 0.0:
            raise DataValidationError(f"basis {g} has non-positive trace")
        init[g] = tr_c / (m * tr_g) if tr_c > 0.0 else 1.0 / tr_g
    return init


def estimate_sigma(
    c: ScatterMatrix,
    bases,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    init=None,
) -> EstimationResult:
    """Fixed-point iteration for the covariance coefficients.

    Each pass assembles Sigma from the current coefficients, rebuilds
    the trace system at that Sigma, solves it, and measures the L2 step
    norm; iteration stops when the step norm drops to ``tol`` or after
    ``max_iter`` passes (reported via ``converged``, not an exception).
    Negative coefficients are clamped to a small positive floor before
    the next assembly and their indices recorded in ``projected``.

    A rank-deficient scatter matrix (fewer samples than dimensions) is
    acceptable: only Sigma is inverted, never C.
    """
    bases, dim = _check_bases(bases)
    c_mat = c.c if isinstance(c, ScatterMatrix) else np.asarray(c, dtype=np.float64)
    if c_mat.shape[0] != dim:
        raise DataValidationError(
            f"scatter dimension {c_mat.shape[0]} does not match bases dimension {dim}"
        )
    if validate_spd(c_mat) is SpdVerdict.INDEFINITE:
        raise DataValidationError("scatter matrix must be positive semidefinite")
    floor = FLOOR_FRAC * float(np.trace(c_mat)) / dim
    if init is None:
        sig = _default_init(c_mat, bases)
    else:
        sig = np.asarray(init, dtype=np.float64).ravel().copy()
        if sig.size != len(bases):
            raise DataValidationError("init length does not match basis count")
    projected = set(np.flatnonzero(sig < 0.0))
    sig = np.where(sig < 0.0, floor, sig)

    history = []
    converged = False
    residual = math.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        sigma_mat = _combine(bases, sig)
        a, b = trace_system(sigma_mat, bases, c_mat)
        try:
            sig_new = np.linalg.solve(a, b)
        except np.linalg.LinAlgError:
            raise NumericalError(
                "trace system is singular (bases indistinguishable at this iterate)"
            ) from None
        residual = float(np.linalg.norm(sig_new - sig))
        history.append(residual)
        neg = np.flatnonzero(sig_new < 0.0)
        projected.update(int(i) for i in neg)
        sig = np.where(sig_new < 0.0, floor, sig_new)
        if residual <= tol:
            converged = True
            break
    return EstimationResult(
        sigma_hat=sig,
        iterations=iterations,
        residual=residual,
        converged=converged,
        projected=tuple(sorted(projected)),
        sigma_matrix=_combine(bases, sig),
        bases=tuple(bases),
        history=tuple(history),
    )


def _avg_loglik(sigma: np.ndarray, c_mat: np.ndarray) -> float:
    """Average Gaussian log-likelihood, additive constants dropped."""
    solve, logdet, _ = _spd_solve_factory(sigma)
    return -0.5 * (logdet + float(np.trace(solve(c_mat))))


def _f_gradient(sigma: np.ndarray, c_mat: np.ndarray, f: np.ndarray, sigma0: float):
    """d/dF of the average log-likelihood: sigma0 (S^-1 C S^-1 - S^-1) F."""
    solve, _, _ = _spd_solve_factory(sigma)
    sif = solve(f)
    return sigma0 * (solve(c_mat @ sif) - sif)


def _init_factor(c_mat: np.ndarray, known: list, sigma_known: np.ndarray, rank: int):
    """Whitened-spectrum start for F: excess variance of C over the known part."""
    d = c_mat.shape[0]
    if known:
        r_mat = _combine(known, sigma_known)
    else:
        r_mat = np.eye(d) * max(float(np.trace(c_mat)) / d, 1e-8)
    vals, vecs = np.linalg.eigh(symmetrize(r_mat))
    vals = np.clip(vals, 1e-12 * max(vals[-1], 1.0), None)
    r_half_inv = (vecs / np.sqrt(vals)) @ vecs.T
    r_half = (vecs * np.sqrt(vals)) @ vecs.T
    white = symmetrize(r_half_inv @ c_mat @ r_half_inv)
    wvals, wvecs = np.linalg.eigh(white)
    top = np.argsort(wvals)[::-1][:rank]
    excess = np.clip(wvals[top] - 1.0, 1e-6, None)
    return r_half @ (wvecs[:, top] * np.sqrt(excess))


def estimate_with_unknown_g0(
    c: ScatterMatrix,
    bases,
    rank: int,
    max_cycles: int = 500,
    tol: float = 1e-9,
    sigma0_fixed: float | None = None,
    init_f=None,
    init_sigma=None,
) -> FactorComponentResult:
    """Alternating ascent with one covariance component G_0 = F F^T unknown.

    Cycle structure: (a) with F fixed, treat F F^T as an extra basis and
    take a damped step along the trace-system solution for every
    coefficient; (b) with coefficients fixed, take a backtracking
    gradient-ascent step on F.  Both steps only accept candidates that
    do not lower the average log-likelihood, so ``objective_trace`` is
    non-decreasing.  F is identified only up to right-orthogonal
    transforms; compare F F^T or the fitted covariance, never F itself.

    ``sigma0_fixed=0`` switches the extension off and reduces to
    :func:`estimate_sigma` on the known bases alone.
    """
    known, dim = _check_bases(bases) if bases else ([], None)
    c_mat = c.c if isinstance(c, ScatterMatrix) else np.asarray(c, dtype=np.float64)
    if dim is None:
        dim = c_mat.shape[0]
    if c_mat.shape[0] != dim:
        raise DataValidationError("scatter dimension does not match bases")
    if not 1 <= rank <= dim:
        raise DataValidationError(f"rank must be in [1, {dim}], got {rank}")

    if sigma0_fixed is not None and sigma0_fixed == 0.0:
        inner = estimate_sigma(c, known)
        sigma_hat = np.concatenate(([0.0], inner.sigma_hat))
        return FactorComponentResult(
            f_hat=np.zeros((dim, rank)),
            sigma_hat=sigma_hat,
            objective_trace=np.array([_avg_loglik(inner.sigma_matrix, c_mat)]),
            converged=inner.converged,
            cycles=inner.iterations,
            sigma_matrix=inner.sigma_matrix,
            diagnostics={"extension": "off"},
        )

    floor = FLOOR_FRAC * max(float(np.trace(c_mat)), 1e-30) / dim
    n_known = len(known)
    if init_sigma is None:
        sig = np.empty(n_known + 1)
        sig[0] = 1.0
        if n_known:
            sig[1:] = _default_init(c_mat, known) * (n_known / (n_known + 1.0))
    else:
        sig = np.asarray(init_sigma, dtype=np.float64).ravel().copy()
        if sig.size != n_known + 1:
            raise DataValidationError("init_sigma must cover sigma_0 and every basis")
    sig = np.maximum(sig, floor)
    if sigma0_fixed is not None:
        sig[0] = sigma0_fixed
    f = (
        np.asarray(init_f, dtype=np.float64).reshape(dim, rank).copy()
        if init_f is not None
        else _init_factor(c_mat, known, sig[1:], rank)
    )

    def sigma_of(sig_vec, f_mat):
        return _combine([f_mat @ f_mat.T] + known, sig_vec)

    def safe_loglik(sig_vec, f_mat):
        try:
            return _avg_loglik(sigma_of(sig_vec, f_mat), c_mat)
        except NumericalError:
            return -math.inf

    objective = [safe_loglik(sig, f)]
    if not math.isfinite(objective[0]):
        raise NumericalError("initial covariance is singular; supply a better start")
    converged = False
    t_prev = 1.0
    cycles = 0
    for cycles in range(1, max_cycles + 1):
        cycle_start = objective[-1]

        # (a) damped trace-system step in the coefficients
        bases_all = [f @ f.T] + known
        try:
            a, b = trace_system(sigma_of(sig, f), bases_all, c_mat)
            direction = np.linalg.solve(a, b) - sig
        except (NumericalError, np.linalg.LinAlgError):
            direction = None
        if direction is not None and sigma0_fixed is not None:
            direction[0] = 0.0
        if direction is not None:
            t = 1.0
            for _ in range(MAX_BACKTRACKS):
                cand = np.maximum(sig + t * direction, floor)
                if sigma0_fixed is not None:
                    cand[0] = sigma0_fixed
                val = safe_loglik(cand, f)
                if val >= objective[-1]:
                    sig = cand
                    objective.append(val)
                    break
                t *= BACKTRACK_SHRINK
            else:
                objective.append(objective[-1])
        else:
            objective.append(objective[-1])

        # (b) backtracking gradient ascent on F
        grad = _f_gradient(sigma_of(sig, f), c_mat, f, sig[0])
        gnorm2 = float((grad**2).sum())
        if gnorm2 > 0.0:
            t = t_prev
            accepted = False
            for _ in range(MAX_BACKTRACKS):
                cand = f + t * grad
                val = safe_loglik(sig, cand)
                if val >= objective[-1] + ARMIJO_C1 * t * gnorm2 and math.isfinite(val):
                    f = cand
                    objective.append(val)
                    t_prev = min(t * 2.0, 1e6)
                    accepted = True
                    break
                t *= BACKTRACK_SHRINK
            if not accepted:
                objective.append(objective[-1])
                t_prev = max(t_prev * BACKTRACK_SHRINK, 1e-12)
        else:
            objective.append(objective[-1])

        gain = objective[-1] - cycle_start
        if gain < 0.0:
            raise NumericalError("log-likelihood decreased; ascent guard failed")
        if gain <= tol:
            converged = True
            break

    return FactorComponentResult(
        f_hat=f,
        sigma_hat=sig,
        objective_trace=np.array(objective),
        converged=converged,
        cycles=cycles,
        sigma_matrix=sigma_of(sig, f),
        diagnostics={"rank": rank},
    )


def stationarity_residual(c: ScatterMatrix, bases, f: np.ndarray, sigma) -> dict:
    """Residuals of the likelihood stationarity conditions at (sigma, F).

    ``sigma`` covers the F-component coefficient first, then the known
    bases.  Returns the max-norm residuals of the coefficient equations
    (A sigma - b) and of the F gradient, plus their maximum.
    """
    c_mat = c.c if isinstance(c, ScatterMatrix) else np.asarray(c, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64).ravel()
    f = np.asarray(f, dtype=np.float64)
    known, _ = _check_bases(bases) if bases else ([], None)
    bases_all = [f @ f.T] + known
    sigma_mat = _combine(bases_all, sigma)
    a, b = trace_system(sigma_mat, bases_all, c_mat)
    sig_res = float(np.abs(a @ sigma - b).max())
    f_res = float(np.abs(_f_gradient(sigma_mat, c_mat, f, sigma[0])).max())
    return {
        "sigma_residual": sig_res,
        "f_residual": f_res,
        "max_residual": max(sig_res, f_res),
    }


def reliability_from_components(
    result: EstimationResult, error_index: int
) -> ReliabilityReport:
    """Reliability implied by a fitted structure with a designated error basis.

    r = 1 - sigma_err * meandiag(G_err) / meandiag(Sigma_hat): the
    error share of the average per-variable variance.  For a balanced
    one-way random-effects structure (block-of-ones basis plus identity
    error) this equals the intraclass correlation exactly.
    """
    if not 0 <= error_index < len(result.bases):
        raise DataValidationError(
            f"error_index {error_index} out of range for {len(result.bases)} bases"
        )
    total = float(np.mean(np.diag(result.sigma_matrix)))
    if total <= 0.0:
        raise DataValidationError("fitted covariance has non-positive mean diagonal")
    err = result.sigma_hat[error_index] * float(
        np.mean(np.diag(result.bases[error_index]))
    )
    return ReliabilityReport(
        coefficient=1.0 - err / total,
        method="COVMLE",
        diagnostics={
            "error_index": error_index,
            "converged": result.converged,
            "iterations": result.iterations,
        },
    )
