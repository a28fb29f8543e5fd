"""Exception types shared across the package.

Every raised condition gets its own class so callers can catch precisely;
messages carry the offending values.
"""


class SkyhexError(Exception):
    """Base class for all package errors."""


class ConfigError(SkyhexError):
    """Invalid or inconsistent configuration document."""


class NonPositiveDt(SkyhexError):
    pass


class NonMonotonicTimestamp(SkyhexError):
    pass


class ZeroAccelVector(SkyhexError):
    pass


class DegenerateMagField(SkyhexError):
    """Magnetic field (anti)parallel to estimated gravity: yaw unobservable."""


class EmptyMask(SkyhexError):
    pass


class StaleMeasurement(SkyhexError):
    pass


class OutOfSpan(SkyhexError):
    """Query time outside a trajectory's time span."""


class InsufficientCorrespondences(SkyhexError):
    """Fewer than the minimum shared landmarks for an alignment."""


class DegenerateConfiguration(SkyhexError):
    """Point set is coincident or collinear; rigid alignment underdetermined."""


class DisconnectedGraph(SkyhexError):
    pass


class LocalizationFailed(SkyhexError):
    pass


class NoPath(SkyhexError):
    pass


class InvalidEndpoint(SkyhexError):
    """Start or goal cell is lethal, unknown, or outside the grid."""


class AllTrajectoriesCollide(SkyhexError):
    """Every sampled velocity command's rollout intersects an obstacle."""


class Unreachable(SkyhexError):
    """Foot target outside the leg workspace."""


class JointLimitViolation(SkyhexError):
    pass


class DegenerateSupport(SkyhexError):
    """Too few stance feet (or all collinear) for the requested computation."""


class UndeclaredTopic(SkyhexError):
    pass


class MaxRetriesExceeded(SkyhexError):
    """A transfer chunk ran out of retransmission attempts; session stalled."""
