"""Limiting variance of the debiased estimators.

Every total decomposes as

    n * var(estimator) -> var_of_cond_exp + exp_of_cond_var

conditioning on the nuisance fits.  The first piece is driven by the joint
fluctuations of the fitted inner products (alpha_hat^T beta_hat,
alpha_hat^T beta0, alpha0^T beta_hat); the second is the evaluation-split
sampling noise with the fits frozen at their limits.  Both reduce to a short
table of spectral integrals against the limiting eigenvalue law.
"""

from __future__ import annotations

from dataclasses import dataclass

from .debias import (
    DISPLAY_VERSION,
    PROOF_VERSION,
    EstimatorKind,
    GConstants,
    Normalizers,
    as_kind,
    check_split,
    compute_constants,
    normalizers,
)
from .errors import AllDegenerate, ConfigError, DegenerateNormalizer
from .mp import MpLaw, SpectralIntegrand, mp_integral


@dataclass(frozen=True)
class LimitParams:
    """Population-side limits: aspect ratio and coefficient geometry.

    u and v are the limiting euclidean norms of the two coefficient vectors
    (not squared norms); varrho is their inner product.
    """

    c: float
    u: float
    v: float
    varrho: float
    rho: float

    def __post_init__(self) -> None:
        if self.c <= 0:
            raise ConfigError("c must be positive")
        if self.u < 0 or self.v < 0:
            raise ConfigError("u and v are norms, must be nonnegative")
        if abs(self.varrho) > self.u * self.v + 1e-12:
            raise ConfigError("|varrho| cannot exceed u*v")

    @property
    def theta0(self) -> float:
        return self.rho


def var_ay(lp: LimitParams) -> float:
    """Variance of the product A*Y for one fresh observation."""
    return (1.0 + lp.u**2) * (1.0 + lp.v**2) + (lp.rho + lp.varrho) ** 2


def variance_integrands(lambda1: float, lambda2: float) -> dict[str, SpectralIntegrand]:
    """Every spectral integrand the variance formulas (and the g constants)
    consume, keyed by a short descriptive name."""
    l1, l2 = lambda1, lambda2
    return {
        "m1_lam1": SpectralIntegrand(0, (l1, 1)),
        "m1_lam2": SpectralIntegrand(0, (l2, 1)),
        "m2_lam1": SpectralIntegrand(0, (l1, 2)),
        "m2_lam2": SpectralIntegrand(0, (l2, 2)),
        "i_lam1": SpectralIntegrand(1, (l1, 1)),
        "i_lam2": SpectralIntegrand(1, (l2, 1)),
        "j1_lam1": SpectralIntegrand(1, (l1, 2)),
        "j1_lam2": SpectralIntegrand(1, (l2, 2)),
        "j2_lam1": SpectralIntegrand(2, (l1, 2)),
        "j2_lam2": SpectralIntegrand(2, (l2, 2)),
        "k0": SpectralIntegrand(0, (l1, 1), (l2, 1)),
        "k1": SpectralIntegrand(1, (l1, 1), (l2, 1)),
        "g1": SpectralIntegrand(2, (l1, 1), (l2, 1)),
        "l2": SpectralIntegrand(2, (l1, 2), (l2, 2)),
        "l3": SpectralIntegrand(3, (l1, 2), (l2, 2)),
        "l4": SpectralIntegrand(4, (l1, 2), (l2, 2)),
        "m21": SpectralIntegrand(2, (l1, 2), (l2, 1)),
        "m12": SpectralIntegrand(2, (l1, 1), (l2, 2)),
        "n31": SpectralIntegrand(3, (l1, 2), (l2, 1)),
        "n32": SpectralIntegrand(3, (l1, 1), (l2, 2)),
    }


@dataclass(frozen=True)
class SpectralTable:
    """All integrals for a fixed (c, lambda1, lambda2), evaluated once."""

    lambda1: float
    lambda2: float
    m1_lam1: float
    m1_lam2: float
    m2_lam1: float
    m2_lam2: float
    i_lam1: float
    i_lam2: float
    j1_lam1: float
    j1_lam2: float
    j2_lam1: float
    j2_lam2: float
    k0: float
    k1: float
    g1: float
    l2: float
    l3: float
    l4: float
    m21: float
    m12: float
    n31: float
    n32: float

    @classmethod
    def from_law(cls, law: MpLaw, lambda1: float, lambda2: float) -> "SpectralTable":
        vals = {
            name: mp_integral(law, f)
            for name, f in variance_integrands(lambda1, lambda2).items()
        }
        return cls(lambda1=lambda1, lambda2=lambda2, **vals)

    # spectral variances/covariances of h1 = x/(x+l1), h2 = x/(x+l2),
    # f1 = x^2/((x+l1)(x+l2))
    @property
    def var_h1(self) -> float:
        return self.j2_lam1 - self.i_lam1**2

    @property
    def var_h2(self) -> float:
        return self.j2_lam2 - self.i_lam2**2

    @property
    def cov_h1_h2(self) -> float:
        return self.g1 - self.i_lam1 * self.i_lam2

    @property
    def var_f1(self) -> float:
        return self.l4 - self.g1**2

    @property
    def cov_f1_h1(self) -> float:
        return self.n31 - self.g1 * self.i_lam1

    @property
    def cov_f1_h2(self) -> float:
        return self.n32 - self.g1 * self.i_lam2


def bilinear_variance_limit(
    law: MpLaw, u: float, v: float, varrho: float, f: SpectralIntegrand
) -> float:
    """Limit of n * var(a^T f(S) b) for deterministic vectors with
    |a| -> u, |b| -> v, a^T b -> varrho, S the sample covariance."""
    mean = mp_integral(law, f)
    second = mp_integral(law, f.squared())
    return (varrho**2 + u**2 * v**2) * (second - mean**2) / law.c


@dataclass(frozen=True)
class VarianceBlocks:
    """Reusable pieces the six totals are assembled from."""

    e_alpha: float  # lim E|alpha0 - alpha_hat|^2
    e_beta: float
    vb1: float  # n var(alpha_hat^T beta0)
    vb2: float  # n var(alpha0^T beta_hat)
    nvar2: float  # n var(alpha_hat^T beta_hat), shared fit split
    nvar3: float  # same, independent fit splits
    cv1: float  # n cov(alpha_hat^T beta_hat, alpha_hat^T beta0), shared split
    cv2: float  # n cov(alpha_hat^T beta_hat, alpha0^T beta_hat), shared split
    cv3: float  # n cov(alpha_hat^T beta0, alpha0^T beta_hat), shared split
    q2: float  # lim (alpha0-alpha_hat)^T (beta0-beta_hat), shared split
    q3: float  # same, independent splits
    q_nr: float  # lim beta0^T (alpha0 - alpha_hat)
    b2n: float  # lim |beta_hat|^2


def variance_blocks(law: MpLaw, lp: LimitParams, table: SpectralTable) -> VarianceBlocks:
    c = law.c
    u2, v2 = lp.u**2, lp.v**2
    vr, rho = lp.varrho, lp.rho
    t = table
    l1, l2lam = t.lambda1, t.lambda2
    pair = (vr**2 + u2 * v2) / c

    e_alpha = u2 * l1**2 * t.m2_lam1 + c * t.j1_lam1
    e_beta = v2 * l2lam**2 * t.m2_lam2 + c * t.j1_lam2
    vb1 = pair * t.var_h1 + v2 * t.j1_lam1
    vb2 = pair * t.var_h2 + u2 * t.j1_lam2
    nvar2 = pair * t.var_f1 + (u2 + v2) * t.l3 + 2.0 * rho * vr * t.l3 \
        + c * (1.0 + rho**2) * t.l2
    b2n = v2 * t.j2_lam2 + c * t.j1_lam2
    nvar3 = t.i_lam1**2 * vb2 \
        + (t.var_h1 / c) * (vr**2 * t.i_lam2**2 + u2 * b2n) \
        + b2n * t.j1_lam1
    cv1 = pair * t.cov_f1_h1 + (v2 + rho * vr) * t.m21
    cv2 = pair * t.cov_f1_h2 + (u2 + rho * vr) * t.m12
    cv3 = pair * t.cov_h1_h2 + rho * vr * t.k1
    q2 = l1 * l2lam * vr * t.k0 + rho * c * t.k1
    q3 = l1 * l2lam * vr * t.m1_lam1 * t.m1_lam2
    q_nr = l1 * vr * t.m1_lam1
    return VarianceBlocks(
        e_alpha=e_alpha, e_beta=e_beta, vb1=vb1, vb2=vb2,
        nvar2=nvar2, nvar3=nvar3, cv1=cv1, cv2=cv2, cv3=cv3,
        q2=q2, q3=q3, q_nr=q_nr, b2n=b2n,
    )


@dataclass(frozen=True)
class VarianceBreakdown:
    var_of_cond_exp: float
    exp_of_cond_var: float

    @property
    def total(self) -> float:
        return self.var_of_cond_exp + self.exp_of_cond_var


def _check_h(value: float, label: str) -> float:
    if abs(value) < 1e-6:
        raise DegenerateNormalizer(f"{label} normalizer ~ 0 at this lambda")
    return value


def limiting_variance(
    kind,
    split: int,
    law: MpLaw,
    lp: LimitParams,
    lambda1: float,
    lambda2: float | None = None,
    g: GConstants | None = None,
    table: SpectralTable | None = None,
    nr2sp_variant: str = PROOF_VERSION,
) -> VarianceBreakdown:
    """Limit of n * var(debiased estimator), split into the conditional
    pieces.  Raises DegenerateNormalizer where a two-split prefactor blows
    up."""
    kind = as_kind(kind)
    check_split(split)
    if lambda2 is None:
        lambda2 = lambda1
    if g is None:
        g = compute_constants(law, lambda1, lambda2)
    if table is None:
        table = SpectralTable.from_law(law, lambda1, lambda2)
    h = normalizers(g, nr2sp_variant)
    bl = variance_blocks(law, lp, table)
    u2, v2 = lp.u**2, lp.v**2
    rho = lp.rho

    if kind is EstimatorKind.INT:
        if split == 3:
            scale = h.int_3sp_scale
            return VarianceBreakdown(
                var_of_cond_exp=bl.nvar3 * scale**2,
                exp_of_cond_var=var_ay(lp),
            )
        hfac = 1.0 / _check_h(h.int_2sp_denom, "INT 2sp")
        return VarianceBreakdown(
            var_of_cond_exp=hfac**2 * bl.nvar2 / g.g1_int_2sp**2,
            exp_of_cond_var=hfac**2 * var_ay(lp),
        )

    if kind is EstimatorKind.NR:
        ecv_core = (1.0 + v2) * (1.0 + bl.e_alpha) + (bl.q_nr + rho) ** 2
        if split == 3:
            kappa = h.nr_3sp_subtract
            voce = bl.vb1 + kappa**2 * bl.nvar3 \
                + 2.0 * kappa * table.i_lam2 * bl.vb1
            return VarianceBreakdown(var_of_cond_exp=voce, exp_of_cond_var=ecv_core)
        hfac = 1.0 / _check_h(h.nr_2sp_denom, "NR 2sp")
        sub = h.nr_2sp_subtract
        voce = hfac**2 * (bl.vb1 + sub**2 * bl.nvar2 + 2.0 * sub * bl.cv1)
        return VarianceBreakdown(
            var_of_cond_exp=voce, exp_of_cond_var=hfac**2 * ecv_core
        )

    # DR
    if split == 3:
        kap = h.dr_3sp_subtract
        voce = (1.0 - kap) ** 2 * bl.nvar3 \
            + (1.0 - 2.0 * (1.0 - kap) * table.i_lam2) * bl.vb1 \
            + (1.0 - 2.0 * (1.0 - kap) * table.i_lam1) * bl.vb2
        ecv = (1.0 + bl.e_alpha) * (1.0 + bl.e_beta) + (bl.q3 + rho) ** 2
        return VarianceBreakdown(var_of_cond_exp=voce, exp_of_cond_var=ecv)
    hfac = 1.0 / _check_h(h.dr_2sp_denom, "DR 2sp")
    sub = h.dr_2sp_subtract
    voce = hfac**2 * (
        bl.vb1 + bl.vb2 + (1.0 - sub) ** 2 * bl.nvar2
        + 2.0 * bl.cv3 - 2.0 * (1.0 - sub) * (bl.cv1 + bl.cv2)
    )
    ecv = hfac**2 * (
        (1.0 + bl.e_alpha) * (1.0 + bl.e_beta) + (bl.q2 + rho) ** 2
    )
    return VarianceBreakdown(var_of_cond_exp=voce, exp_of_cond_var=ecv)


@dataclass(frozen=True)
class CurvePoint:
    lam: float
    breakdown: VarianceBreakdown | None  # None marks a degenerate lambda

    @property
    def degenerate(self) -> bool:
        return self.breakdown is None


@dataclass(frozen=True)
class OptimizeResult:
    lambda_opt: float
    breakdown_opt: VarianceBreakdown
    points: tuple[CurvePoint, ...]

    @property
    def degenerate_lambdas(self) -> tuple[float, ...]:
        return tuple(p.lam for p in self.points if p.degenerate)


def variance_curve(
    kind,
    split: int,
    law: MpLaw,
    lp: LimitParams,
    grid,
    nr2sp_variant: str = PROOF_VERSION,
) -> tuple[CurvePoint, ...]:
    """Evaluate the limiting variance along a shared lambda grid (both
    nuisance penalties tied).  Degenerate points are kept, flagged."""
    points = []
    for lam in grid:
        try:
            bd = limiting_variance(
                kind, split, law, lp, float(lam), nr2sp_variant=nr2sp_variant
            )
        except DegenerateNormalizer:
            bd = None
        points.append(CurvePoint(lam=float(lam), breakdown=bd))
    return tuple(points)


def optimize_lambda(
    kind,
    split: int,
    law: MpLaw,
    lp: LimitParams,
    grid,
    nr2sp_variant: str = PROOF_VERSION,
) -> OptimizeResult:
    """Grid-minimize the limiting variance total.  Ties break toward the
    smallest lambda; a grid where every point is degenerate raises."""
    points = variance_curve(kind, split, law, lp, grid, nr2sp_variant)
    best = None
    for p in points:
        if p.breakdown is None:
            continue
        if best is None or p.breakdown.total < best.breakdown.total:
            best = p
    if best is None:
        raise AllDegenerate(
            f"every grid point is degenerate for {as_kind(kind).value} {split}sp"
        )
    return OptimizeResult(
        lambda_opt=best.lam, breakdown_opt=best.breakdown, points=points
    )
