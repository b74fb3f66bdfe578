"""Bias-correction constants and the raw/debiased conditional-covariance
estimators, for both split layouts.

Three estimator families share the same nuisance fits:
  INT  mean(a*y) - alpha^T beta        (plug-in through the coefficient inner product)
  NR   mean(y * (a - X alpha))         (single-nuisance residual form)
  DR   mean((y - X beta)(a - X alpha)) (double-residual form)
Each one is debiased by inverting deterministic spectral constants; the
two-split corrections also divide by a normalizer that can vanish at specific
lambda values, which is surfaced as DegenerateNormalizer.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import ridge
from .dgp import Dataset
from .errors import ConfigError, DegenerateNormalizer
from .mp import MpLaw, SpectralIntegrand, mp_integral, mc_spectral_oracle

DEGENERATE_TOL = 1e-6

PROOF_VERSION = "proof"
DISPLAY_VERSION = "display"


class EstimatorKind(Enum):
    INT = "INT"
    NR = "NR"
    DR = "DR"


def as_kind(value) -> EstimatorKind:
    if isinstance(value, EstimatorKind):
        return value
    try:
        return EstimatorKind(str(value).upper())
    except ValueError:
        raise ConfigError(f"unknown estimator kind {value!r}") from None


def check_split(split: int) -> int:
    if split not in (2, 3):
        raise ConfigError(f"split must be 2 or 3, got {split!r}")
    return split


@dataclass(frozen=True)
class GConstants:
    g_int_3sp: float
    g1_int_2sp: float
    g2_int_2sp: float
    g_nr: float
    g_dr_3sp: float
    g_dr2_2sp: float


@dataclass(frozen=True)
class MonteCarloConstants:
    """Constants via simulated spectra instead of quadrature."""

    n: int = 500
    iters: int = 10000
    seed: int = 0


QUADRATURE = "quadrature"


def constant_integrands(lambda1: float, lambda2: float) -> dict[str, SpectralIntegrand]:
    """The spectral integrals underlying the g constants."""
    return {
        "i_lam1": SpectralIntegrand(1, (lambda1, 1)),
        "i_lam2": SpectralIntegrand(1, (lambda2, 1)),
        "g1_cross": SpectralIntegrand(2, (lambda1, 1), (lambda2, 1)),
        "k1_cross": SpectralIntegrand(1, (lambda1, 1), (lambda2, 1)),
        "m1_lam1": SpectralIntegrand(0, (lambda1, 1)),
        "m1_lam2": SpectralIntegrand(0, (lambda2, 1)),
        "k0_cross": SpectralIntegrand(0, (lambda1, 1), (lambda2, 1)),
    }


def compute_constants(
    law: MpLaw,
    lambda1: float,
    lambda2: float,
    method=QUADRATURE,
) -> GConstants:
    """Evaluate all six g constants for (lambda1, lambda2, c)."""
    if not (lambda1 > 0 and lambda2 > 0):
        raise ConfigError("lambda1 and lambda2 must be positive")
    fs = constant_integrands(lambda1, lambda2)
    if method == QUADRATURE:
        vals = {name: mp_integral(law, f) for name, f in fs.items()}
    elif isinstance(method, MonteCarloConstants):
        vals = {
            name: mc_spectral_oracle(law.c, method.n, f, method.iters, method.seed)[0]
            for name, f in fs.items()
        }
    else:
        raise ConfigError(f"unknown constants method {method!r}")
    return GConstants(
        g_int_3sp=vals["i_lam1"] * vals["i_lam2"],
        g1_int_2sp=vals["g1_cross"],
        g2_int_2sp=law.c * vals["k1_cross"],
        g_nr=1.0 - vals["i_lam1"],
        g_dr_3sp=lambda1 * lambda2 * vals["m1_lam1"] * vals["m1_lam2"],
        g_dr2_2sp=lambda1 * lambda2 * vals["k0_cross"],
    )


@dataclass(frozen=True)
class Normalizers:
    """Named prefactors shared by the estimators and the variance formulas."""

    int_2sp_denom: float  # 1 - g2/g1
    nr_2sp_denom: float  # 1 - g2*g_nr/g1
    nr_2sp_subtract: float  # g_nr/g1 (proof) or g2*g_nr/g1 (display)
    dr_2sp_denom: float  # 1 + g2*(1 - g_dr2/g1)
    dr_2sp_subtract: float  # g_dr2/g1
    int_3sp_scale: float  # 1/g_int_3sp
    nr_3sp_subtract: float  # g_nr/g_int_3sp
    dr_3sp_subtract: float  # g_dr_3sp/g_int_3sp


def normalizers(g: GConstants, nr2sp_variant: str = PROOF_VERSION) -> Normalizers:
    if nr2sp_variant not in (PROOF_VERSION, DISPLAY_VERSION):
        raise ConfigError(f"unknown nr2sp variant {nr2sp_variant!r}")
    nr_sub = g.g_nr / g.g1_int_2sp
    if nr2sp_variant == DISPLAY_VERSION:
        nr_sub = g.g2_int_2sp * g.g_nr / g.g1_int_2sp
    return Normalizers(
        int_2sp_denom=1.0 - g.g2_int_2sp / g.g1_int_2sp,
        nr_2sp_denom=1.0 - g.g2_int_2sp * g.g_nr / g.g1_int_2sp,
        nr_2sp_subtract=nr_sub,
        dr_2sp_denom=1.0 + g.g2_int_2sp * (1.0 - g.g_dr2_2sp / g.g1_int_2sp),
        dr_2sp_subtract=g.g_dr2_2sp / g.g1_int_2sp,
        int_3sp_scale=1.0 / g.g_int_3sp,
        nr_3sp_subtract=g.g_nr / g.g_int_3sp,
        dr_3sp_subtract=g.g_dr_3sp / g.g_int_3sp,
    )


def _check_denom(value: float, label: str) -> float:
    if abs(value) < DEGENERATE_TOL:
        raise DegenerateNormalizer(f"{label} normalizer ~ 0 (|{value:.2e}| < {DEGENERATE_TOL})")
    return value


@dataclass(frozen=True)
class DebiasPlan:
    kind: EstimatorKind
    split: int
    lambda1: float
    lambda2: float
    g: GConstants
    method: object = QUADRATURE
    nr2sp_variant: str = PROOF_VERSION

    def __post_init__(self) -> None:
        check_split(self.split)
        if not (self.lambda1 > 0 and self.lambda2 > 0):
            raise ConfigError("plan lambdas must be positive")

    @classmethod
    def build(
        cls,
        kind,
        split: int,
        law: MpLaw,
        lambda1: float,
        lambda2: float,
        method=QUADRATURE,
        nr2sp_variant: str = PROOF_VERSION,
    ) -> "DebiasPlan":
        g = compute_constants(law, lambda1, lambda2, method)
        return cls(as_kind(kind), check_split(split), lambda1, lambda2, g,
                   method, nr2sp_variant)


@dataclass(frozen=True)
class EvalMoments:
    """Evaluation-split means plus the fitted inner product."""

    mean_ay: float
    mean_nr: float
    mean_dr: float
    ab: float  # alpha_hat^T beta_hat


def validate_views(split: int, d_alpha: Dataset, d_beta: Dataset, d_eval: Dataset) -> None:
    check_split(split)
    if split == 2:
        if d_alpha is not d_beta:
            raise ConfigError("two-split estimation fits both nuisances on the same view")
        if d_alpha is d_eval or np.shares_memory(d_alpha.X, d_eval.X):
            raise ConfigError("evaluation split must be disjoint from the nuisance split")
    else:
        pairs = [(d_alpha, d_beta), (d_alpha, d_eval), (d_beta, d_eval)]
        for left, right in pairs:
            if left is right or np.shares_memory(left.X, right.X):
                raise ConfigError("three-split estimation needs three disjoint views")


def fit_nuisances(
    d_alpha: Dataset,
    d_beta: Dataset,
    lambda1: float,
    lambda2: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Ridge coefficients (alpha_hat, beta_hat) for the two nuisances.

    When both nuisances live on one view (two-split), the Gram factorization
    is shared across the two solves."""
    solver_a = ridge.GramSolver(d_alpha.X)
    solver_b = solver_a if d_beta.X is d_alpha.X else ridge.GramSolver(d_beta.X)
    alpha = solver_a.solve(d_alpha.a, lambda1).coef
    beta = solver_b.solve(d_beta.y, lambda2).coef
    return alpha, beta


def moments_given_fits(
    alpha: np.ndarray, beta: np.ndarray, d_eval: Dataset
) -> EvalMoments:
    resid_a = d_eval.a - d_eval.X @ alpha
    resid_y = d_eval.y - d_eval.X @ beta
    return EvalMoments(
        mean_ay=float(np.mean(d_eval.a * d_eval.y)),
        mean_nr=float(np.mean(d_eval.y * resid_a)),
        mean_dr=float(np.mean(resid_y * resid_a)),
        ab=float(alpha @ beta),
    )


def eval_moments(
    split: int,
    d_alpha: Dataset,
    d_beta: Dataset,
    d_eval: Dataset,
    lambda1: float,
    lambda2: float,
) -> EvalMoments:
    """Fit both nuisances once and reduce the evaluation split to the four
    scalars every estimator is a function of."""
    validate_views(split, d_alpha, d_beta, d_eval)
    alpha, beta = fit_nuisances(d_alpha, d_beta, lambda1, lambda2)
    return moments_given_fits(alpha, beta, d_eval)


def raw_from_moments(kind: EstimatorKind, moments: EvalMoments) -> float:
    if kind is EstimatorKind.INT:
        return moments.mean_ay - moments.ab
    if kind is EstimatorKind.NR:
        return moments.mean_nr
    return moments.mean_dr


def debiased_from_moments(
    kind: EstimatorKind,
    split: int,
    moments: EvalMoments,
    g: GConstants,
    nr2sp_variant: str = PROOF_VERSION,
) -> float:
    h = normalizers(g, nr2sp_variant)
    ab = moments.ab
    if split == 3:
        if kind is EstimatorKind.INT:
            return moments.mean_ay - ab * h.int_3sp_scale
        if kind is EstimatorKind.NR:
            return moments.mean_nr - ab * h.nr_3sp_subtract
        return moments.mean_dr - ab * h.dr_3sp_subtract
    if kind is EstimatorKind.INT:
        denom = _check_denom(h.int_2sp_denom, "INT 2sp")
        return (moments.mean_ay - ab / g.g1_int_2sp) / denom
    if kind is EstimatorKind.NR:
        denom = _check_denom(h.nr_2sp_denom, "NR 2sp")
        return (moments.mean_nr - ab * h.nr_2sp_subtract) / denom
    denom = _check_denom(h.dr_2sp_denom, "DR 2sp")
    return (moments.mean_dr - ab * h.dr_2sp_subtract) / denom


def raw_estimate(
    kind,
    split: int,
    d_alpha: Dataset,
    d_beta: Dataset,
    d_eval: Dataset,
    lambda1: float,
    lambda2: float,
) -> float:
    """Plug-in estimate without bias correction."""
    moments = eval_moments(split, d_alpha, d_beta, d_eval, lambda1, lambda2)
    return raw_from_moments(as_kind(kind), moments)


def debiased_estimate(
    plan: DebiasPlan,
    d_alpha: Dataset,
    d_beta: Dataset,
    d_eval: Dataset,
) -> float:
    moments = eval_moments(
        plan.split, d_alpha, d_beta, d_eval, plan.lambda1, plan.lambda2
    )
    return debiased_from_moments(
        plan.kind, plan.split, moments, plan.g, plan.nr2sp_variant
    )


def asymptotic_bias(
    kind,
    split: int,
    varrho: float,
    theta0: float,
    g: GConstants,
) -> float:
    """Predicted E[raw_estimate] - theta0 in the proportional limit."""
    kind = as_kind(kind)
    check_split(split)
    if kind is EstimatorKind.INT:
        if split == 3:
            return varrho * (1.0 - g.g_int_3sp)
        return varrho * (1.0 - g.g1_int_2sp) - theta0 * g.g2_int_2sp
    if kind is EstimatorKind.NR:
        return varrho * g.g_nr
    if split == 3:
        return varrho * g.g_dr_3sp
    return theta0 * g.g2_int_2sp + varrho * g.g_dr2_2sp
