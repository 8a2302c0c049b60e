"""Exception types raised by kmschain."""


class KMSChainError(ValueError):
    """Base class for all library errors."""


class GridTooCoarse(KMSChainError):
    pass


class SupportMismatch(KMSChainError):
    pass


class DimensionOverflow(KMSChainError):
    pass


class NotHermitian(KMSChainError):
    pass


class NotPositive(KMSChainError):
    pass


class NotDisjoint(KMSChainError):
    pass


class NotDensity(KMSChainError):
    pass


class InsufficientDim(KMSChainError):
    pass


class QuadratureBudgetExceeded(KMSChainError):
    pass


class LambdaZero(KMSChainError):
    pass


class OutOfStrip(KMSChainError):
    pass


class ConfigInvalid(KMSChainError):
    pass
