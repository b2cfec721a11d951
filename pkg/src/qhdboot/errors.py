"""Exception types shared across the package."""


class QhdbootError(Exception):
    """Base class for every package-specific error."""


class NormInfinite(QhdbootError):
    """The weighted sup-norm is infinite: the function does not vanish at
    +/-infinity while the weight function is unbounded."""


class LevelOutOfRange(QhdbootError):
    """A quantile/inverse level lies outside (0, total mass]."""


class RangeTooSmall(QhdbootError):
    """A lattice range does not cover the support of the input."""


class EmptySample(QhdbootError):
    """An operation received an empty sample."""


class LengthMismatch(QhdbootError):
    """Sample and weight vector lengths differ."""


class BlockLengthInvalid(QhdbootError):
    """Block length outside [1, n) or the closed-form weight cases do not
    partition the index set."""


class LatticeMismatch(QhdbootError):
    """Two lattice pmfs have incompatible step sizes or incommensurate
    origins."""


class MomentDiverges(QhdbootError):
    """A required count-moment series diverges for the weight exponent in
    use."""


class NonIntegrable(QhdbootError):
    """The risk functional is not defined: the integrand does not vanish in
    the tail (infinite first moment or total mass incompatible with the
    distortion)."""


class NonIntegrableDirection(QhdbootError):
    """A derivative direction is not integrable (non-vanishing tails)."""


class PathTooShort(QhdbootError):
    """A simulated path is too short for the requested lag truncation."""


class FactorizationFailed(QhdbootError):
    """Covariance factorization failed even after the maximum jitter."""


class ConfigInvalid(QhdbootError):
    """An experiment configuration failed validation. The message names the
    offending key."""


class IoError(QhdbootError):
    """Reading or writing an artifact file failed."""
