"""Marchenko-Pastur spectral law: quadrature, Stieltjes transform, and a
Monte Carlo eigenvalue oracle.

The bulk density on [(1-sqrt(c))^2, (1+sqrt(c))^2] is
sqrt((hi-x)(x-lo)) / (2 pi c x); for c > 1 the law carries an atom of mass
1 - 1/c at zero. Integrals are computed with the substitution
x = m + r sin(theta), which turns the square-root edge factor into
r^2 cos^2(theta) and leaves a smooth integrand (also at the c = 1 hard edge),
then adaptive panel-doubled Gauss-Legendre until the relative change drops
below rel_tol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import roots_legendre

from .errors import ConfigError, DimensionError, NonIntegrable, QuadratureFailure
from .seeding import substream

DEFAULT_REL_TOL = 1e-10

_GL_ORDER = 32
_GL_NODES, _GL_WEIGHTS = roots_legendre(_GL_ORDER)
_MAX_PANELS = 4096


@dataclass(frozen=True)
class MpLaw:
    """Limiting spectral law of X^T X / n with p/n -> c."""

    c: float
    edge_lo: float = field(init=False)
    edge_hi: float = field(init=False)
    atom_mass: float = field(init=False)

    def __post_init__(self) -> None:
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ConfigError(f"aspect ratio must be positive, got {self.c}")
        sc = math.sqrt(self.c)
        object.__setattr__(self, "edge_lo", (1.0 - sc) ** 2)
        object.__setattr__(self, "edge_hi", (1.0 + sc) ** 2)
        object.__setattr__(self, "atom_mass", max(0.0, 1.0 - 1.0 / self.c))


@dataclass(frozen=True)
class SpectralIntegrand:
    """x^a * prefactor / ((x + lam1)^b * (x + lam2)^d).

    The family is closed under products, which is how variance functionals
    build their var/cov terms.
    """

    x_power: int = 0
    pole1: tuple[float, int] = (0.0, 0)
    pole2: tuple[float, int] = (0.0, 0)
    prefactor: float = 1.0

    def __post_init__(self) -> None:
        if self.x_power < 0:
            raise ConfigError("x_power must be a nonnegative integer")
        for lam, mult in (self.pole1, self.pole2):
            if mult < 0 or lam < 0:
                raise ConfigError("pole (lam, mult) must both be nonnegative")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full_like(x, self.prefactor)
        if self.x_power:
            out = out * x**self.x_power
        lam1, b = self.pole1
        if b:
            out = out / (x + lam1) ** b
        lam2, d = self.pole2
        if d:
            out = out / (x + lam2) ** d
        return out

    def squared(self) -> "SpectralIntegrand":
        return SpectralIntegrand(
            2 * self.x_power,
            (self.pole1[0], 2 * self.pole1[1]),
            (self.pole2[0], 2 * self.pole2[1]),
            self.prefactor**2,
        )

    def times(self, other: "SpectralIntegrand") -> "SpectralIntegrand":
        # Products are only needed between integrands sharing pole locations
        # (or with a fresh pole slot available).
        poles: dict[float, int] = {}
        for lam, mult in (self.pole1, self.pole2, other.pole1, other.pole2):
            if mult:
                poles[lam] = poles.get(lam, 0) + mult
        if len(poles) > 2:
            raise ConfigError("product would need more than two pole locations")
        items = sorted(poles.items())
        while len(items) < 2:
            items.append((0.0, 0))
        return SpectralIntegrand(
            self.x_power + other.x_power,
            items[0],
            items[1],
            self.prefactor * other.prefactor,
        )


def _bulk_quadrature(law: MpLaw, f: Callable, rel_tol: float) -> float:
    """Adaptive Gauss-Legendre on theta in [-pi/2, pi/2] after the sine map."""
    m = 0.5 * (law.edge_lo + law.edge_hi)
    r = 0.5 * (law.edge_hi - law.edge_lo)
    bulk_mass = min(1.0, 1.0 / law.c)

    def level(panels: int) -> float:
        edges = np.linspace(-0.5 * math.pi, 0.5 * math.pi, panels + 1)
        mid = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * (edges[1] - edges[0])
        theta = (mid[:, None] + half * _GL_NODES[None, :]).ravel()
        x = m + r * np.sin(theta)
        dens = (r * r) * np.cos(theta) ** 2 / (2.0 * math.pi * law.c * x)
        vals = np.asarray(f(x), dtype=float) * dens
        w = np.broadcast_to(_GL_WEIGHTS[None, :], (panels, _GL_ORDER)).ravel()
        return float(np.sum(vals * w) * half)

    prev = level(1)
    panels = 2
    while panels <= _MAX_PANELS:
        cur = level(panels)
        scale = max(abs(cur), abs(prev), bulk_mass * 1e-300 + 1e-300)
        if abs(cur - prev) <= rel_tol * scale:
            if not math.isfinite(cur):
                raise QuadratureFailure("non-finite quadrature value")
            return cur
        prev = cur
        panels *= 2
    raise QuadratureFailure(
        f"no convergence to rel_tol={rel_tol} within {_MAX_PANELS} panels"
    )


def mp_integral(law: MpLaw, f: Callable, rel_tol: float = DEFAULT_REL_TOL) -> float:
    """Integrate f against the law, atom included.

    Raises NonIntegrable when the law has an atom at zero and f(0) is not
    finite, and QuadratureFailure when panel doubling stalls.
    """
    atom = 0.0
    if law.atom_mass > 0.0:
        f0 = float(np.asarray(f(np.asarray(0.0))))
        if not math.isfinite(f0):
            raise NonIntegrable("integrand is not finite at the atom location 0")
        atom = law.atom_mass * f0
    return atom + _bulk_quadrature(law, f, rel_tol)


def stieltjes(law: MpLaw, lam: float, rel_tol: float = DEFAULT_REL_TOL) -> float:
    """m(-lam) = integral of 1/(x + lam) dF, lam > 0."""
    if not lam > 0:
        raise ConfigError(f"stieltjes point must be positive, got {lam}")
    return mp_integral(law, SpectralIntegrand(0, (lam, 1)), rel_tol)


@dataclass(frozen=True)
class IdentityRow:
    name: str
    value: float
    expected: float
    ok: bool


def identity_checks(
    law: MpLaw,
    lambdas: tuple[float, ...] = (0.5, 1.0, 2.0),
    tol: float = 1e-8,
) -> list[IdentityRow]:
    """Known closed-form facts the quadrature must reproduce: total mass 1,
    mean 1, second moment 1 + c, and the Stieltjes self-consistency
    m = 1 / (1 - c + c*lam*m + lam)."""
    rows = [
        IdentityRow("mass", mp_integral(law, SpectralIntegrand(0)), 1.0, False),
        IdentityRow("mean", mp_integral(law, SpectralIntegrand(1)), 1.0, False),
        IdentityRow(
            "second_moment", mp_integral(law, SpectralIntegrand(2)), 1.0 + law.c, False
        ),
    ]
    for lam in lambdas:
        m = stieltjes(law, lam)
        fixed_point = 1.0 / (1.0 - law.c + law.c * lam * m + lam)
        rows.append(IdentityRow(f"stieltjes(lam={lam:g})", m, fixed_point, False))
    return [
        IdentityRow(r.name, r.value, r.expected, abs(r.value - r.expected) <= tol)
        for r in rows
    ]


_oracle_cache: dict[tuple, list[np.ndarray]] = {}


def _oracle_eigenvalues(c: float, n: int, draws: int, seed: int) -> list[np.ndarray]:
    key = (float(c), int(n), int(draws), int(seed))
    hit = _oracle_cache.get(key)
    if hit is not None:
        return hit
    p = int(round(c * n))
    if p < 1:
        raise DimensionError(f"p = round(c*n) = {p} must be at least 1")
    out = []
    for i in range(draws):
        rng = substream(seed, "mp_oracle", i)
        x = rng.standard_normal((n, p))
        if p <= n:
            eig = np.linalg.eigvalsh(x.T @ x / n)
        else:
            nonzero = np.linalg.eigvalsh(x @ x.T / n)
            eig = np.concatenate([np.zeros(p - n), nonzero])
        out.append(np.clip(eig, 0.0, None))
    if len(_oracle_cache) > 8:
        _oracle_cache.clear()
    _oracle_cache[key] = out
    return out


def mc_spectral_oracle(
    c: float, n: int, f: Callable, draws: int, seed: int
) -> tuple[float, float]:
    """Average (1/p) sum f(eigenvalue) over simulated covariance spectra.

    Returns (mean, std_err) across `draws` independent draws; each draw i uses
    the substream (seed, draw_index=i). Serves as the mutual oracle for the
    quadrature path.
    """
    spectra = _oracle_eigenvalues(c, n, draws, seed)
    per_draw = np.array([float(np.mean(f(eig))) for eig in spectra])
    mean = float(per_draw.mean())
    if draws > 1:
        se = float(per_draw.std(ddof=1) / math.sqrt(draws))
    else:
        se = float("nan")
    return mean, se
