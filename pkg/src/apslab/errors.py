"""Exception types raised across the package."""


class ApsLabError(Exception):
    """Base class for all library errors."""


class RadiusCapExceeded(ApsLabError):
    pass


class NonSummable(ApsLabError):
    pass


class NonSummableClass(NonSummable):
    pass


class TruncationInsufficient(ApsLabError):
    pass


class InvalidEpsilon(ApsLabError):
    pass


class EpsilonTooLarge(ApsLabError):
    pass


class TailUnbounded(ApsLabError):
    pass


class ExtrapolationUnstable(ApsLabError):
    pass


class BoundaryNotInvertible(ApsLabError):
    pass


class UnsupportedGeometry(ApsLabError):
    pass


class ConfigInvalid(ApsLabError):
    pass


class IoFailure(ApsLabError):
    pass
