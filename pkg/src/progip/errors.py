"""Exception types shared across the package."""


class ProgipError(Exception):
    """Base class for all library errors."""


class DegenerateInput(ProgipError):
    """A 6D rotation vector cannot be orthonormalized (zero or parallel columns)."""


class ShapeMismatch(ProgipError):
    """An array does not have the shape a network or pipeline stage expects."""


class InvalidPrefix(ProgipError):
    """A partial-FK joint set is not one of the four kinematic-chain stage sets."""


class TooShort(ProgipError):
    """A sequence has fewer frames than the operation needs."""


class LengthMismatch(ProgipError):
    """Two sequences that must be frame-aligned differ in length."""


class NonFiniteLoss(ProgipError):
    """A training step produced NaN/Inf loss; the step was aborted."""


class FormatError(ProgipError):
    """A canonical motion directory is malformed (bad metadata or blob size)."""


class NaNError(ProgipError):
    """A loaded blob contains non-finite values."""


class ProtocolError(ProgipError):
    """A dataset catalog cannot be split under the requested protocol."""


class IoError(ProgipError):
    """Pose export failed (empty stream or unwritable target)."""
