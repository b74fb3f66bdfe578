"""Parametric bootstrap for the debiased estimators.

The replicate model regenerates data from bias-inverted coefficient
surrogates: fitted norms and inner products are mapped back through their
known spectral attenuation, giving (alpha_tilde, beta_tilde) whose fitted
images look like the originals.  Radicands that go negative (sampling noise
exceeding the attenuation floor) are clamped at zero and flagged.

Replicate draws depend on (alpha_tilde, beta_tilde, rho_hat) only through
(|alpha_tilde|, |beta_tilde|, alpha_tilde^T beta_tilde, rho_hat) by
rotational invariance, which the engine path exploits; the vector path
regenerates full datasets and is the reference implementation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dgp import Dataset, ModelParams, SplitLayout, generate_with_rng, split as split_data
from .debias import (
    DebiasPlan,
    GConstants,
    PROOF_VERSION,
    check_split,
    debiased_from_moments,
    eval_moments,
    fit_nuisances,
    moments_given_fits,
    validate_views,
)
from .engine import ExactSampler, estimator_draws
from .errors import ConfigError, ZeroDirection
from .mp import MpLaw, SpectralIntegrand, mp_integral
from .seeding import substream

RHO_BOUND = 1.0 - 1e-6
_TINY_NORM = 1e-12


@dataclass(frozen=True)
class BootConstants:
    """Spectral attenuation constants for the coefficient inversion:
    E|coef|^2 ~ u^2 c_j + d_j and E[ab]_3sp ~ varrho c3."""

    c1: float  # int x^2/(x+l1)^2
    c2: float
    d1: float  # c int x/(x+l1)^2
    d2: float
    c3: float  # I(l1) I(l2)


def compute_boot_constants(law: MpLaw, lambda1: float, lambda2: float) -> BootConstants:
    if not (lambda1 > 0 and lambda2 > 0):
        raise ConfigError("lambdas must be positive")
    j2_1 = mp_integral(law, SpectralIntegrand(2, (lambda1, 2)))
    j2_2 = mp_integral(law, SpectralIntegrand(2, (lambda2, 2)))
    j1_1 = mp_integral(law, SpectralIntegrand(1, (lambda1, 2)))
    j1_2 = mp_integral(law, SpectralIntegrand(1, (lambda2, 2)))
    i1 = mp_integral(law, SpectralIntegrand(1, (lambda1, 1)))
    i2 = mp_integral(law, SpectralIntegrand(1, (lambda2, 1)))
    return BootConstants(
        c1=j2_1, c2=j2_2, d1=law.c * j1_1, d2=law.c * j1_2, c3=i1 * i2
    )


@dataclass(frozen=True)
class TransformedScalars:
    """Replicate-model geometry: |alpha_tilde| = u, beta_tilde = t along the
    alpha_hat direction plus resid along the deterministic perpendicular."""

    u: float
    t: float
    resid: float
    clamped: bool

    @property
    def v(self) -> float:
        return float(np.hypot(self.t, self.resid))

    @property
    def inner(self) -> float:
        return self.u * self.t


def transform_scalars(
    norm2_alpha: float,
    norm2_beta: float,
    ab: float,
    rho_hat: float,
    bc: BootConstants,
    g: GConstants,
    split: int,
) -> TransformedScalars:
    check_split(split)
    clamped = False
    u2 = (norm2_alpha - bc.d1) / bc.c1
    if u2 < 0.0:
        u2, clamped = 0.0, True
    u = float(np.sqrt(u2))
    if split == 3:
        num = ab / bc.c3
    else:
        num = (ab - g.g2_int_2sp * rho_hat) / g.g1_int_2sp
    if u < _TINY_NORM:
        t = 0.0
        if abs(num) > _TINY_NORM:
            clamped = True
    else:
        t = num / u
    resid2 = (norm2_beta - bc.d2) / bc.c2 - t * t
    if resid2 < 0.0:
        resid2, clamped = 0.0, True
    return TransformedScalars(u=u, t=t, resid=float(np.sqrt(resid2)), clamped=clamped)


def perpendicular_direction(alpha_hat: np.ndarray) -> np.ndarray:
    """Deterministic unit vector orthogonal to alpha_hat: take the axis where
    alpha_hat is smallest in magnitude, Gram-Schmidt, normalize."""
    norm2 = float(alpha_hat @ alpha_hat)
    if norm2 < _TINY_NORM**2:
        raise ZeroDirection("alpha_hat is numerically zero")
    k = int(np.argmin(np.abs(alpha_hat)))
    z = -(alpha_hat[k] / norm2) * alpha_hat
    z[k] += 1.0
    zn = float(np.linalg.norm(z))
    if zn < _TINY_NORM:
        raise ZeroDirection("no direction orthogonal to alpha_hat")
    return z / zn


def transform_coefficients(
    alpha_hat: np.ndarray,
    beta_hat: np.ndarray,
    rho_hat: float,
    bc: BootConstants,
    g: GConstants,
    split: int,
) -> tuple[np.ndarray, np.ndarray, bool]:
    """Vector-level inversion: returns (alpha_tilde, beta_tilde, clamped)."""
    na = float(np.linalg.norm(alpha_hat))
    if na < _TINY_NORM:
        raise ZeroDirection("alpha_hat is numerically zero")
    ts = transform_scalars(
        na * na, float(beta_hat @ beta_hat), float(alpha_hat @ beta_hat),
        rho_hat, bc, g, split,
    )
    direction = alpha_hat / na
    alpha_tilde = direction * ts.u
    beta_tilde = direction * ts.t
    if ts.resid > 0.0:
        beta_tilde = beta_tilde + perpendicular_direction(alpha_hat) * ts.resid
    return alpha_tilde, beta_tilde, ts.clamped


def _clip_rho(rho_hat: float) -> tuple[float, bool]:
    if abs(rho_hat) > RHO_BOUND:
        return float(np.sign(rho_hat) * RHO_BOUND), True
    return float(rho_hat), False


@dataclass(frozen=True)
class BootstrapResult:
    se: float
    clamped: bool
    b_used: int


def _population_sd(values: np.ndarray) -> float:
    m = float(np.mean(values))
    second = float(np.mean(np.square(values)))
    return float(np.sqrt(max(second - m * m, 0.0)))


def bootstrap_variance(
    plan: DebiasPlan,
    alpha_tilde: np.ndarray,
    beta_tilde: np.ndarray,
    rho_hat: float,
    n_per_split: int,
    B: int,
    master_seed: int,
    path: tuple = (),
    clamped: bool = False,
) -> BootstrapResult:
    """Reference vector path: B full replicate datasets, one substream per
    replicate, SE = sqrt(second moment - squared mean)."""
    if B < 1:
        raise ConfigError("B must be >= 1")
    p = alpha_tilde.shape[0]
    rho_rep, clipped = _clip_rho(rho_hat)
    params = ModelParams(p=p, alpha0=alpha_tilde, beta0=beta_tilde, rho=rho_rep)
    layout = (
        SplitLayout.two(n_per_split, n_per_split)
        if plan.split == 2
        else SplitLayout.three(n_per_split, n_per_split, n_per_split)
    )
    n_total = sum(layout.sizes)
    values = np.empty(B)
    for b in range(B):
        rng = substream(master_seed, *path, "pboot", b)
        data = generate_with_rng(params, n_total, rng)
        parts = split_data(data, layout)
        if plan.split == 2:
            d_alpha = d_beta = parts[0]
            d_eval = parts[1]
        else:
            d_alpha, d_beta, d_eval = parts
        moments = eval_moments(
            plan.split, d_alpha, d_beta, d_eval, plan.lambda1, plan.lambda2
        )
        values[b] = debiased_from_moments(
            plan.kind, plan.split, moments, plan.g, plan.nr2sp_variant
        )
    return BootstrapResult(
        se=_population_sd(values), clamped=clamped or clipped, b_used=B
    )


def bootstrap_variance_engine(
    kind,
    split: int,
    n_per_split: int,
    p: int,
    lambda1: float,
    lambda2: float,
    scalars: TransformedScalars,
    rho_hat: float,
    g: GConstants,
    B: int,
    rng,
    nr2sp_variant: str = PROOF_VERSION,
    batch: int = 2048,
) -> BootstrapResult:
    """Engine path: same replicate law, O(n) per draw."""
    if B < 1:
        raise ConfigError("B must be >= 1")
    rho_rep, clipped = _clip_rho(rho_hat)
    sampler = ExactSampler(
        n=n_per_split, p=p, split=split, lambda1=lambda1, lambda2=lambda2,
        u=scalars.u, v=scalars.v, varrho=scalars.inner, rho=rho_rep,
    )
    chunks = []
    remaining = B
    while remaining > 0:
        take = min(batch, remaining)
        draws = sampler.sample(take, rng)
        _, debiased = estimator_draws(draws, kind, split, g, nr2sp_variant)
        chunks.append(debiased)
        remaining -= take
    values = np.concatenate(chunks)
    return BootstrapResult(
        se=_population_sd(values), clamped=scalars.clamped or clipped, b_used=B
    )


def bootstrap_se_for_data(
    plan: DebiasPlan,
    bc: BootConstants,
    d_alpha: Dataset,
    d_beta: Dataset,
    d_eval: Dataset,
    B: int,
    rng,
    batch: int = 2048,
) -> BootstrapResult:
    """Full pipeline on one observed dataset: fit, estimate rho_hat, invert
    the coefficient scalars, run B engine replicates."""
    validate_views(plan.split, d_alpha, d_beta, d_eval)
    alpha_hat, beta_hat = fit_nuisances(d_alpha, d_beta, plan.lambda1, plan.lambda2)
    moments = moments_given_fits(alpha_hat, beta_hat, d_eval)
    rho_hat = debiased_from_moments(
        plan.kind, plan.split, moments, plan.g, plan.nr2sp_variant
    )
    scalars = transform_scalars(
        float(alpha_hat @ alpha_hat),
        float(beta_hat @ beta_hat),
        moments.ab,
        rho_hat,
        bc,
        plan.g,
        plan.split,
    )
    return bootstrap_variance_engine(
        kind=plan.kind,
        split=plan.split,
        n_per_split=d_eval.n,
        p=d_eval.p,
        lambda1=plan.lambda1,
        lambda2=plan.lambda2,
        scalars=scalars,
        rho_hat=rho_hat,
        g=plan.g,
        B=B,
        rng=rng,
        nr2sp_variant=plan.nr2sp_variant,
        batch=batch,
    )
