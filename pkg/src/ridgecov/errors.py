"""Exception types shared across the package."""


class RidgecovError(Exception):
    """Base class for all package-specific failures."""


class ConfigError(RidgecovError):
    """A user-supplied configuration value violates a precondition."""


class NonIntegrable(RidgecovError):
    """The integrand is infinite at zero while the spectral law carries an atom there."""


class QuadratureFailure(RidgecovError):
    """Adaptive quadrature failed to reach the requested relative tolerance."""


class DimensionError(RidgecovError):
    """A matrix dimension is out of range (e.g. p < 1)."""


class CauchySchwarzViolation(RidgecovError):
    """Requested inner product exceeds the product of the requested norms."""


class SizeMismatch(RidgecovError):
    """Split sizes do not tile the dataset."""


class SolveFailure(RidgecovError):
    """A linear solve produced non-finite output or received non-finite input."""


class DegenerateNormalizer(RidgecovError):
    """A two-split debiasing prefactor's denominator is numerically zero."""


class AllDegenerate(RidgecovError):
    """Every grid point hit a degenerate normalizer."""


class ZeroDirection(RidgecovError):
    """A direction vector required to be nonzero has zero norm."""
