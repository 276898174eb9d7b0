"""Random-walk Metropolis sampling of a scalar latent parameter.

The unnormalized target is prod_i N(x_i | theta, 1) * Phi(theta, x_i)
with Phi(theta, x) = exp(-scale * |theta - x|).  The joint density is
always handled in log space so long products cannot underflow;
acceptance falls back to the smoothed ratio
min(1, (p* + 1e-12) / (p + 1e-12)) only when a density is too small to
represent at all.  See relicov.kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from relicov import kernels
from relicov.core import rng_stream
from relicov.exceptions import DataValidationError

__all__ = [
    "SMOOTHING",
    "LatentThetaModel",
    "McmcChain",
    "ChainSummary",
    "likelihood",
    "phi",
    "log_joint_prob",
    "joint_prob",
    "acceptance_log_ratio",
    "metropolis",
    "chain_summary",
]

SMOOTHING = 1e-12
_LOG_SMOOTHING = math.log(SMOOTHING)
DEFAULT_PROPOSAL_SD = 0.5
DEFAULT_PHI_SCALE = 0.1


@dataclass(frozen=True)
class LatentThetaModel:
    """Observations plus the interaction decay constant.

    The per-observation likelihood is a unit-variance normal centered
    at theta (``likelihood_sd`` is fixed at 1); ``phi_scale=0`` turns
    the interaction weight into the constant 1.
    """

    observations: np.ndarray
    phi_scale: float = DEFAULT_PHI_SCALE
    likelihood_sd: float = field(default=1.0, init=False)

    def __post_init__(self):
        obs = np.asarray(self.observations, dtype=np.float64).ravel()
        if not np.isfinite(obs).all():
            raise DataValidationError("observations must be finite")
        if self.phi_scale < 0.0:
            raise DataValidationError("phi_scale must be >= 0")
        object.__setattr__(self, "observations", obs)

    @property
    def k(self) -> int:
        return self.observations.size


@dataclass(frozen=True)
class McmcChain:
    samples: np.ndarray
    acceptance_rate: float
    seed: int
    proposal_sd: float

    def __len__(self) -> int:
        return self.samples.size


@dataclass(frozen=True)
class ChainSummary:
    mean: float
    variance: float
    acceptance_rate: float
    ess: float | None
    n_used: int
    diagnostics: dict = field(default_factory=dict)


def likelihood(xi: float, theta: float) -> float:
    """Unit-variance normal density of xi around theta."""
    d = xi - theta
    return math.exp(-0.5 * d * d) / math.sqrt(2.0 * math.pi)


def phi(theta: float, xi: float, scale: float = DEFAULT_PHI_SCALE) -> float:
    """Interaction weight exp(-scale * |theta - xi|), in (0, 1]."""
    if scale < 0.0:
        raise DataValidationError("scale must be >= 0")
    return math.exp(-scale * abs(theta - xi))


def log_joint_prob(model: LatentThetaModel, theta: float) -> float:
    """Log of the unnormalized target; 0.0 for an empty observation set."""
    if model.k == 0:
        return 0.0
    return float(kernels.log_joint(model.observations, float(theta), model.phi_scale))


def joint_prob(model: LatentThetaModel, theta: float) -> float:
    """Unnormalized target density (may underflow to 0 for large k).

    Use :func:`log_joint_prob` when the product of many near-zero
    factors matters.
    """
    return math.exp(log_joint_prob(model, theta))


def acceptance_log_ratio(log_p_star: float, log_p: float) -> float:
    """Log acceptance probability used by the sampler.

    The plain Metropolis ratio log(p*/p) capped at 0 while both
    densities are representable in double precision; once either
    underflows, the smoothed form log((p* + 1e-12)/(p + 1e-12)) takes
    over (via logaddexp) so the step remains well-defined.  In the
    no-underflow regime this agrees with the direct linear-space ratio
    to floating-point precision.
    """
    return float(kernels.accept_log_ratio(float(log_p_star), float(log_p)))


def metropolis(
    model: LatentThetaModel,
    iterations: int,
    proposal_sd: float = DEFAULT_PROPOSAL_SD,
    seed: int = 0,
    init: float | None = None,
) -> McmcChain:
    """Random-walk Metropolis chain over theta.

    The proposal is normal with scale ``proposal_sd`` around the
    current state; the current state is recorded every iteration, so
    the chain has exactly ``iterations`` entries.  ``init=None`` draws
    the start from a standard normal, matching the default sampler
    setup; chains with equal seeds are identical.
    """
    if iterations < 0:
        raise DataValidationError("iterations must be >= 0")
    if proposal_sd <= 0.0:
        raise DataValidationError("proposal_sd must be positive")
    rng = rng_stream(seed)
    theta0 = float(rng.standard_normal()) if init is None else float(init)
    if iterations == 0:
        return McmcChain(
            samples=np.empty(0), acceptance_rate=0.0, seed=seed, proposal_sd=proposal_sd
        )
    z = rng.standard_normal(iterations)
    u = rng.random(iterations)
    samples, accepts = kernels.run_chain(
        model.observations, z, u, theta0, proposal_sd, model.phi_scale
    )
    return McmcChain(
        samples=samples,
        acceptance_rate=accepts / iterations,
        seed=seed,
        proposal_sd=proposal_sd,
    )


def chain_summary(chain: McmcChain, burn_in: int | None = None) -> ChainSummary:
    """Post-burn-in moments and effective sample size.

    ``burn_in`` defaults to 20% of the chain.  The ESS uses Geyer's
    initial-positive-sequence truncation of the autocorrelation sum; a
    zero-variance chain is flagged as degenerate with ESS ``None``.
    """
    n = len(chain)
    if burn_in is None:
        burn_in = n // 5
    if burn_in < 0 or burn_in >= n:
        raise DataValidationError(f"burn_in {burn_in} must be in [0, {n})")
    kept = chain.samples[burn_in:]
    m = kept.size
    mean = float(kept.mean())
    variance = float(kept.var(ddof=1)) if m > 1 else 0.0
    diagnostics = {}
    if variance == 0.0:
        diagnostics["degenerate"] = "zero-variance chain"
        return ChainSummary(
            mean=mean,
            variance=0.0,
            acceptance_rate=chain.acceptance_rate,
            ess=None,
            n_used=m,
            diagnostics=diagnostics,
        )
    centered = kept - mean
    # autocovariances via FFT, normalized to autocorrelations
    size = 1 << (2 * m - 1).bit_length()
    fft = np.fft.rfft(centered, size)
    acov = np.fft.irfft(fft * np.conj(fft), size)[:m] / m
    rho = acov / acov[0]
    # Geyer: sum rho over pairs while the pair sums stay positive
    tau = 1.0
    t = 1
    while t + 1 < m:
        pair = rho[t] + rho[t + 1]
        if pair <= 0.0:
            break
        tau += 2.0 * pair
        t += 2
    ess = m / tau
    return ChainSummary(
        mean=mean,
        variance=variance,
        acceptance_rate=chain.acceptance_rate,
        ess=float(min(ess, m)),
        n_used=m,
        diagnostics=diagnostics,
    )
