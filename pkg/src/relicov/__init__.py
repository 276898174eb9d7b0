"""relicov: reliability coefficients and structured-covariance estimation.

Classical internal-consistency coefficients (KR20/KR21), ANOVA variance
components and intraclass correlation, exploratory factor analysis with
an omega coefficient, maximum-likelihood estimation of linearly
structured covariance matrices (with an optional unknown low-rank
component), a latent-parameter Metropolis sampler, and a Monte-Carlo
benchmark harness comparing the estimators.
"""

__version__ = "0.1.0"
