"""Data generating process: linear treatment and outcome models with
correlated Gaussian errors, plus coefficient construction and sample
splitting.

Model: X has iid N(0,1) entries; a = X alpha0 + eps, y = X beta0 + mu with
(eps, mu) bivariate standard normal with correlation rho, independent of X.
The target parameter E[cov(a, y | X)] equals rho.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CauchySchwarzViolation, ConfigError, SizeMismatch
from .seeding import substream

EXACT_GRAM = "exact_gram"
UNIFORM_RESCALED = "uniform_rescaled"


@dataclass(frozen=True)
class ModelParams:
    p: int
    alpha0: np.ndarray
    beta0: np.ndarray
    rho: float

    def __post_init__(self) -> None:
        if self.p < 1:
            raise ConfigError("p must be at least 1")
        if self.alpha0.shape != (self.p,) or self.beta0.shape != (self.p,):
            raise ConfigError("coefficient vectors must have shape (p,)")
        if not abs(self.rho) <= 1:
            raise ConfigError(f"|rho| must be at most 1, got {self.rho}")


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    a: np.ndarray
    y: np.ndarray

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class SplitLayout:
    """Contiguous disjoint splits, in generation order."""

    scheme: str  # "two" | "three"
    sizes: tuple[int, ...]

    def __post_init__(self) -> None:
        expected = {"two": 2, "three": 3}.get(self.scheme)
        if expected is None:
            raise ConfigError(f"unknown split scheme {self.scheme!r}")
        if len(self.sizes) != expected:
            raise ConfigError(f"{self.scheme}-split needs {expected} sizes")
        if any(s < 1 for s in self.sizes):
            raise ConfigError("split sizes must be positive")

    @classmethod
    def two(cls, n_nuisance: int, n_eval: int) -> "SplitLayout":
        return cls("two", (n_nuisance, n_eval))

    @classmethod
    def three(cls, n_alpha: int, n_beta: int, n_eval: int) -> "SplitLayout":
        return cls("three", (n_alpha, n_beta, n_eval))


def make_coefficients(
    p: int,
    u: float,
    v: float,
    varrho: float,
    style: str = UNIFORM_RESCALED,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw (alpha0, beta0) with the requested geometry.

    exact_gram: ||alpha0|| = u, ||beta0|| = v, alpha0^T beta0 = varrho, all
    exact to machine precision (random orientation).
    uniform_rescaled: entries Uniform(0,1), each vector rescaled to its norm;
    varrho is ignored (the inner product concentrates near 0.75*u*v).
    """
    if u <= 0 or v <= 0:
        raise ConfigError("norms u, v must be positive")
    rng = substream(seed, "coefficients", style, p)
    if style == UNIFORM_RESCALED:
        alpha = rng.uniform(size=p)
        beta = rng.uniform(size=p)
        alpha *= u / np.linalg.norm(alpha)
        beta *= v / np.linalg.norm(beta)
        return alpha, beta
    if style != EXACT_GRAM:
        raise ConfigError(f"unknown coefficient style {style!r}")
    if abs(varrho) > u * v:
        raise CauchySchwarzViolation(
            f"|varrho| = {abs(varrho)} exceeds u*v = {u * v}"
        )
    if p < 2:
        raise ConfigError("exact_gram needs p >= 2")
    a_dir = rng.standard_normal(p)
    a_dir /= np.linalg.norm(a_dir)
    z = rng.standard_normal(p)
    z -= (z @ a_dir) * a_dir
    z /= np.linalg.norm(z)
    alpha = u * a_dir
    resid = v * v - (varrho / u) ** 2
    beta = (varrho / u) * a_dir + np.sqrt(max(resid, 0.0)) * z
    return alpha, beta


def generate_with_rng(params: ModelParams, n: int, rng: np.random.Generator) -> Dataset:
    """Draw one dataset of n rows from the model using the caller's stream."""
    if n < 1:
        raise ConfigError("n must be at least 1")
    X = rng.standard_normal((n, params.p))
    eps = rng.standard_normal(n)
    mu = params.rho * eps + np.sqrt(1.0 - params.rho**2) * rng.standard_normal(n)
    a = X @ params.alpha0 + eps
    y = X @ params.beta0 + mu
    return Dataset(X, a, y)


def generate(params: ModelParams, n: int, seed: int) -> Dataset:
    """Draw one dataset of n rows from the model, deterministically in seed."""
    return generate_with_rng(params, n, substream(seed, "dgp", n, params.p))


def split(data: Dataset, layout: SplitLayout) -> tuple[Dataset, ...]:
    """Cut the dataset into contiguous disjoint views (no shuffling)."""
    if sum(layout.sizes) != data.n:
        raise SizeMismatch(
            f"split sizes {layout.sizes} do not tile n = {data.n}"
        )
    parts = []
    start = 0
    for size in layout.sizes:
        stop = start + size
        parts.append(Dataset(data.X[start:stop], data.a[start:stop], data.y[start:stop]))
        start = stop
    return tuple(parts)
