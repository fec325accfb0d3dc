"""Exception types shared across the package.

Every error raised by fsid for a contract violation derives from
:class:`FsidError`, so callers (and the Monte Carlo harness, which records
failures instead of aborting) can catch one base class.
"""


class FsidError(Exception):
    """Base class for all fsid contract violations."""


class DimensionMismatch(FsidError):
    """Matrix or trajectory dimensions are inconsistent."""


class InvalidDelta(FsidError):
    """Failure probability outside (0, 1]."""


class ZeroDenominator(FsidError):
    """Scalar least squares with all covariates equal to zero."""


class SingularGram(FsidError):
    """Covariate Gram matrix is numerically singular."""


class NegativeDeviation(FsidError):
    """Tail bound queried at a negative deviation."""


class DomainExceeded(FsidError):
    """Moment generating function queried outside its domain."""


class IntegrationDivergence(FsidError):
    """Numerical quadrature failed to reach its error target."""


class InvalidBlock(FsidError):
    """Block length incompatible with the trajectory length."""


class NotUnitVector(FsidError):
    """Direction argument is not a unit vector."""


class NotOrdered(FsidError):
    """Required Loewner ordering between two matrices fails."""


class NotPositiveDefinite(FsidError):
    """Matrix required to be positive definite is not."""


class UnstableRho(FsidError):
    """Decay rate rho outside (0, 1) passed to the strictly stable rule."""


class ZeroSigmaU(FsidError):
    """Input-error bound requested with zero excitation."""


class TooFewSamples(FsidError):
    """Fewer samples than covariate dimensions."""


class SingularRegularizer(FsidError):
    """Self-normalized bound requires a positive definite regularizer."""


class OrderingViolated(FsidError):
    """Data-dependent certificate condition V <= alpha * V_T fails."""


class SingularRefit(FsidError):
    """A bootstrap trial produced a singular refit problem."""


class NonPositiveValue(FsidError):
    """Rate fit requires strictly positive sizes and errors."""


class ConfigError(FsidError):
    """Scenario configuration file is invalid; message names the field."""
