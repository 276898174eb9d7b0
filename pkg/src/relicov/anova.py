"""One-way and two-way analysis of variance.

Sum-of-squares decompositions, F and t tests with exact p-values,
moment estimation of random-effect variance components, intraclass
correlation, and an empirical verification kit for quadratic-form
chi-square decompositions of Gaussian vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from relicov.exceptions import DataValidationError
from relicov.reliability import ReliabilityReport
from relicov.special import chi2_cdf, f_cdf, ks_test, t_cdf

__all__ = [
    "GroupedObservations",
    "TwoWayLayout",
    "AnovaTable",
    "TwoWayTable",
    "VarianceComponents",
    "CochranDecomposition",
    "CochranCheckResult",
    "oneway_decompose",
    "oneway_f_test",
    "pairwise_t_test",
    "twoway_decompose",
    "estimate_random_effects",
    "icc",
    "oneway_quadratic_forms",
    "cochran_empirical_check",
]

SS_RTOL = 1e-10  # relative tolerance of the SS additivity identity


@dataclass(frozen=True)
class GroupedObservations:
    """k groups of real observations, possibly of unequal size."""

    groups: tuple

    def __post_init__(self):
        groups = tuple(np.asarray(g, dtype=np.float64).ravel() for g in self.groups)
        if len(groups) < 2:
            raise DataValidationError("need at least 2 groups")
        for i, g in enumerate(groups):
            if g.size < 1:
                raise DataValidationError(f"group {i} is empty")
            if not np.isfinite(g).all():
                raise DataValidationError(f"group {i} contains non-finite values")
        object.__setattr__(self, "groups", groups)

    @classmethod
    def from_labels(cls, labels, values) -> "GroupedObservations":
        """Build groups from parallel label/value sequences (label order kept)."""
        labels = list(labels)
        values = np.asarray(values, dtype=np.float64).ravel()
        if len(labels) != values.size:
            raise DataValidationError("labels and values lengths differ")
        order = {}
        for lab, v in zip(labels, values):
            order.setdefault(lab, []).append(v)
        return cls(groups=tuple(np.array(v) for v in order.values()))

    @property
    def k(self) -> int:
        return len(self.groups)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([g.size for g in self.groups])

    @property
    def n(self) -> int:
        return int(self.sizes.sum())

    def is_balanced(self) -> bool:
        return bool((self.sizes == self.sizes[0]).all())


@dataclass(frozen=True)
class TwoWayLayout:
    """r x c grid of cells, each holding m replicate observations.

    Only balanced designs (equal m in every cell) are supported.
    """

    cells: np.ndarray

    def __post_init__(self):
        try:
            cells = np.asarray(self.cells, dtype=np.float64)
        except ValueError:
            raise DataValidationError(
                "unbalanced design: every cell must hold the same number of replicates"
            ) from None
        if cells.ndim == 2:
            cells = cells[:, :, None]
        if cells.ndim != 3:
            raise DataValidationError(
                "cells must be an r x c x m array (or r x c for single replicates)"
            )
        if cells.shape[0] < 2 or cells.shape[1] < 2 or cells.shape[2] < 1:
            raise DataValidationError(f"need r,c >= 2 and m >= 1, got {cells.shape}")
        if not np.isfinite(cells).all():
            raise DataValidationError("cells contain non-finite values")
        object.__setattr__(self, "cells", cells)

    @property
    def shape(self):
        return self.cells.shape


@dataclass(frozen=True)
class AnovaTable:
    total_ss: float
    between_ss: float
    within_ss: float
    df_between: int
    df_within: int
    bms: float | None = None
    wms: float | None = None
    f_stat: float | None = None
    p_value: float | None = None
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class TwoWayTable:
    row_ss: float
    column_ss: float
    interaction_ss: float
    residual_ss: float
    total_ss: float
    df: dict


@dataclass(frozen=True)
class VarianceComponents:
    sigma_a2: float
    sigma2: float
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.sigma_a2 < 0.0 or self.sigma2 < 0.0:
            raise DataValidationError("variance components must be non-negative")


def oneway_decompose(g: GroupedObservations) -> AnovaTable:
    """Total, between-, and within-group sums of squares by direct summation.

    Total SS equals Within SS + Between SS to within 1e-10 relative; a
    flat data set yields all-zero SS with the F statistic flagged as
    undefined rather than NaN.
    """
    all_values = np.concatenate(g.groups)
    grand = all_values.mean()
    within = 0.0
    between = 0.0
    for grp in g.groups:
        m = grp.mean()
        within += float(((grp - m) ** 2).sum())
        between += grp.size * float((m - grand) ** 2)
    total = float(((all_values - grand) ** 2).sum())
    df_b = g.k - 1
    df_w = g.n - g.k
    diagnostics = {}
    bms = wms = f_stat = None
    if df_w >= 1:
        bms = between / df_b
        wms = within / df_w
        if wms > 0.0:
            f_stat = bms / wms
        else:
            diagnostics["f_undefined"] = "within-group mean square is zero"
    else:
        diagnostics["no_within_df"] = True
    return AnovaTable(
        total_ss=total,
        between_ss=between,
        within_ss=within,
        df_between=df_b,
        df_within=df_w,
        bms=bms,
        wms=wms,
        f_stat=f_stat,
        diagnostics=diagnostics,
    )


def oneway_f_test(g: GroupedObservations) -> AnovaTable:
    """One-way F test: F = BMS/WMS against F(k-1, n-k)."""
    table = oneway_decompose(g)
    if table.df_within < 1:
        raise DataValidationError("F test needs at least one within-group df")
    if table.wms is None or table.wms <= 0.0:
        raise DataValidationError("degenerate data: within-group mean square is zero")
    p = 1.0 - f_cdf(table.f_stat, table.df_between, table.df_within)
    return AnovaTable(
        total_ss=table.total_ss,
        between_ss=table.between_ss,
        within_ss=table.within_ss,
        df_between=table.df_between,
        df_within=table.df_within,
        bms=table.bms,
        wms=table.wms,
        f_stat=table.f_stat,
        p_value=float(p),
        diagnostics=table.diagnostics,
    )


def pairwise_t_test(g: GroupedObservations, i: int, j: int) -> dict:
    """Two-group t test pooling the within-group variance of ALL groups.

    The statistic is (mean_i - mean_j) / sqrt((1/n_i + 1/n_j) WMS) with
    n - k degrees of freedom.
    """
    if i == j:
        raise DataValidationError("group indices must differ")
    if not (0 <= i < g.k and 0 <= j < g.k):
        raise DataValidationError(f"group index out of range for k={g.k}")
    table = oneway_decompose(g)
    if table.wms is None or table.wms <= 0.0:
        raise DataValidationError("degenerate data: within-group mean square is zero")
    gi, gj = g.groups[i], g.groups[j]
    t_stat = (gi.mean() - gj.mean()) / np.sqrt(
        (1.0 / gi.size + 1.0 / gj.size) * table.wms
    )
    df = g.n - g.k
    p = 2.0 * (1.0 - t_cdf(abs(float(t_stat)), df))
    return {"t_stat": float(t_stat), "p_value": float(p), "df": df}


def twoway_decompose(t: TwoWayLayout) -> TwoWayTable:
    """Row, column, interaction, and residual sums of squares.

    Balanced designs only.  The four components add up to the total
    deviation SS to 1e-10 relative; with a single replicate per cell
    the residual is identically zero.
    """
    y = t.cells
    r, c, m = y.shape
    grand = y.mean()
    cell_means = y.mean(axis=2)
    row_means = y.mean(axis=(1, 2))
    col_means = y.mean(axis=(0, 2))
    residual = float(((y - cell_means[:, :, None]) ** 2).sum())
    row_ss = c * m * float(((row_means - grand) ** 2).sum())
    col_ss = r * m * float(((col_means - grand) ** 2).sum())
    inter = cell_means - row_means[:, None] - col_means[None, :] + grand
    inter_ss = m * float((inter**2).sum())
    total = float(((y - grand) ** 2).sum())
    df = {
        "rows": r - 1,
        "columns": c - 1,
        "interaction": (r - 1) * (c - 1),
        "residual": r * c * (m - 1),
    }
    return TwoWayTable(
        row_ss=row_ss,
        column_ss=col_ss,
        interaction_ss=inter_ss,
        residual_ss=residual,
        total_ss=total,
        df=df,
    )


def estimate_random_effects(g: GroupedObservations) -> VarianceComponents:
    """Moment estimates of the between/within variance components.

    Requires a balanced design (n_0 observations per group); uses
    sigma^2 = WMS and sigma_A^2 = (BMS - WMS)/n_0 projected to zero
    when negative.  Unbalanced structure needs the covariance-structure
    estimator instead.
    """
    if not g.is_balanced():
        raise DataValidationError(
            "unbalanced groups: the moment estimator requires equal group sizes "
            "(use the linear covariance-structure estimator for general designs)"
        )
    table = oneway_decompose(g)
    if table.df_within < 1:
        raise DataValidationError("need more than one observation per group")
    n0 = int(g.sizes[0])
    sigma2 = table.wms
    raw = (table.bms - table.wms) / n0
    diagnostics = {}
    if raw < 0.0:
        diagnostics["projected"] = "between-group estimate was negative, set to 0"
    return VarianceComponents(
        sigma_a2=max(0.0, raw), sigma2=float(sigma2), diagnostics=diagnostics
    )


def icc(components: VarianceComponents) -> ReliabilityReport:
    """Intraclass correlation sigma_A^2 / (sigma^2 + sigma_A^2)."""
    total = components.sigma_a2 + components.sigma2
    if total <= 0.0:
        raise DataValidationError("ICC undefined: both variance components are zero")
    return ReliabilityReport(
        coefficient=components.sigma_a2 / total,
        method="ICC",
        diagnostics={"sigma_a2": components.sigma_a2, "sigma2": components.sigma2},
    )


@dataclass(frozen=True)
class CochranDecomposition:
    """Quadratic forms Q_j = X^T A_j X with their ranks, in dimension n."""

    forms: tuple
    ranks: tuple
    dim: int

    def __post_init__(self):
        forms = tuple(np.asarray(a, dtype=np.float64) for a in self.forms)
        if not forms:
            raise DataValidationError("need at least one quadratic form")
        for a in forms:
            if a.shape != (self.dim, self.dim):
                raise DataValidationError(
                    f"every form must be {self.dim}x{self.dim}, got {a.shape}"
                )
            eigvals = np.linalg.eigvalsh((a + a.T) / 2.0)
            if eigvals[0] < -1e-8 * max(1.0, abs(eigvals[-1])):
                raise DataValidationError("quadratic forms must be positive semidefinite")
        ranks = tuple(int(r) for r in self.ranks)
        if len(ranks) != len(forms):
            raise DataValidationError("one rank per form required")
        object.__setattr__(self, "forms", forms)
        object.__setattr__(self, "ranks", ranks)

    @classmethod
    def from_forms(cls, forms, dim=None) -> "CochranDecomposition":
        """Infer ranks from eigenvalues (threshold 1e-8 of the largest)."""
        forms = [np.asarray(a, dtype=np.float64) for a in forms]
        if dim is None:
            dim = forms[0].shape[0]
        ranks = []
        for a in forms:
            ev = np.linalg.eigvalsh((a + a.T) / 2.0)
            ranks.append(int((ev > 1e-8 * max(1.0, ev[-1])).sum()))
        return cls(forms=tuple(forms), ranks=tuple(ranks), dim=dim)

    def is_complete(self) -> bool:
        return sum(self.ranks) == self.dim


@dataclass(frozen=True)
class CochranCheckResult:
    ks_stats: tuple
    ks_pvalues: tuple
    correlations: np.ndarray
    complete: bool
    n_draws: int


def oneway_quadratic_forms(group_sizes) -> CochranDecomposition:
    """The grand-mean / between / within projection split for one-way data.

    Returns three mutually orthogonal projections with ranks
    (1, k - 1, n - k) summing to n, in that order.
    """
    sizes = [int(s) for s in group_sizes]
    n = sum(sizes)
    k = len(sizes)
    p_grand = np.full((n, n), 1.0 / n)
    p_group = np.zeros((n, n))
    start = 0
    for s in sizes:
        p_group[start : start + s, start : start + s] = 1.0 / s
        start += s
    a_between = p_group - p_grand
    a_within = np.eye(n) - p_group
    return CochranDecomposition(
        forms=(p_grand, a_between, a_within), ranks=(1, k - 1, n - k), dim=n
    )


def cochran_empirical_check(
    d: CochranDecomposition, n_draws: int, rng: np.random.Generator
) -> CochranCheckResult:
    """Monte-Carlo check that the Q_j behave like independent chi-squares.

    Draws standard-normal vectors, evaluates every quadratic form per
    draw, and reports the KS distance of each Q_j sample against
    chi-square(r_j) together with all pairwise sample correlations.
    When the ranks do not sum to the dimension the decomposition is
    incomplete (theorem hypotheses unmet); the result is still computed
    and flagged via ``complete=False``.
    """
    if n_draws < 2:
        raise DataValidationError("need at least 2 draws")
    x = rng.standard_normal((n_draws, d.dim))
    qs = []
    for a in d.forms:
        qs.append(np.einsum("ij,jk,ik->i", x, a, x))
    ks_stats = []
    ks_ps = []
    for q, r in zip(qs, d.ranks):
        if r < 1:
            ks_stats.append(float("nan"))
            ks_ps.append(float("nan"))
            continue
        stat, p = ks_test(q, lambda v, r=r: chi2_cdf(v, r))
        ks_stats.append(stat)
        ks_ps.append(p)
    corr = np.corrcoef(np.array(qs))
    return CochranCheckResult(
        ks_stats=tuple(ks_stats),
        ks_pvalues=tuple(ks_ps),
        correlations=np.atleast_2d(corr),
        complete=d.is_complete(),
        n_draws=n_draws,
    )
