"""Ridge regression nuisance fits and its limiting prediction risk.

fit() solves (X^T X / n + lam I) coef = X^T target / n through a Cholesky
factorization of whichever Gram matrix (p x p primal or n x n dual) is
smaller; no matrix is ever inverted explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import ConfigError, SolveFailure
from .mp import MpLaw, SpectralIntegrand, mp_integral

RESIDUAL_REL_TOL = 1e-8


@dataclass(frozen=True)
class RidgeFit:
    lam: float
    coef: np.ndarray


def fit(X: np.ndarray, target: np.ndarray, lam: float) -> RidgeFit:
    """Ridge solve with the 1/n Gram convention used throughout."""
    if not lam > 0:
        raise ConfigError(f"ridge penalty must be positive, got {lam}")
    return GramSolver(X).solve(target, lam)


class GramSolver:
    """Factorizes the smaller Gram matrix of one design once and serves ridge
    solves for any number of (lam, target) pairs, caching one Cholesky per
    distinct lam."""

    def __init__(self, X: np.ndarray):
        if not np.isfinite(X).all():
            raise SolveFailure("non-finite values in solver input")
        self.X = X
        self.n, self.p = X.shape
        self.primal = self.p <= self.n
        self.gram = (X.T @ X if self.primal else X @ X.T) / self.n
        self._factors: dict[float, object] = {}

    def _factor(self, lam: float):
        key = float(lam)
        if key not in self._factors:
            if not lam > 0:
                raise ConfigError(f"ridge penalty must be positive, got {lam}")
            shifted = self.gram.copy()
            shifted[np.diag_indices_from(shifted)] += lam
            self._factors[key] = cho_factor(shifted, lower=True)
        return self._factors[key]

    def solve(self, target: np.ndarray, lam: float) -> RidgeFit:
        if not np.isfinite(target).all():
            raise SolveFailure("non-finite values in solver input")
        factor = self._factor(lam)
        rhs = self.X.T @ target / self.n
        if self.primal:
            coef = cho_solve(factor, rhs)
        else:
            coef = self.X.T @ cho_solve(factor, target) / self.n
        if not np.isfinite(coef).all():
            raise SolveFailure("solver produced non-finite coefficients")
        residual = self.X.T @ (self.X @ coef) / self.n + lam * coef - rhs
        rhs_norm = np.linalg.norm(rhs)
        if np.linalg.norm(residual) > RESIDUAL_REL_TOL * max(rhs_norm, 1e-300):
            raise SolveFailure("normal-equation residual exceeds tolerance")
        return RidgeFit(lam=float(lam), coef=coef)


def prediction_mse_theory(law: MpLaw, u: float, lam: float) -> float:
    """Limit of E||coef - alpha0||^2: u^2 lam^2 m2(lam) + c J1(lam)."""
    if not lam > 0:
        raise ConfigError(f"lambda must be positive, got {lam}")
    bias_part = mp_integral(law, SpectralIntegrand(0, (lam, 2), prefactor=lam * lam))
    var_part = mp_integral(law, SpectralIntegrand(1, (lam, 2)))
    return u * u * bias_part + law.c * var_part


def prediction_optimal_lambda(law: MpLaw, u: float) -> float:
    """The exact minimizer of the limiting nuisance MSE."""
    if not u > 0:
        raise ConfigError("u must be positive")
    return law.c / (u * u)
