"""Exception hierarchy shared by every module."""


class KnnMinimaxError(Exception):
    """Base class for all library errors."""


class ConfigError(KnnMinimaxError, ValueError):
    """Invalid configuration or descriptor."""


class MixedDimensions(KnnMinimaxError, ValueError):
    pass


class BadLabel(KnnMinimaxError, ValueError):
    pass


class EmptyDataset(KnnMinimaxError, ValueError):
    pass


class KTooLarge(KnnMinimaxError, ValueError):
    pass


class DimMismatch(KnnMinimaxError, ValueError):
    pass


class EmptyNeighborhood(KnnMinimaxError, ValueError):
    pass


class MissingDensity(KnnMinimaxError, ValueError):
    pass


class QuadratureFailure(KnnMinimaxError, RuntimeError):
    pass


class InvalidNetwork(ConfigError):
    pass


class DegenerateSample(KnnMinimaxError, ValueError):
    pass


class NoBracket(KnnMinimaxError, RuntimeError):
    pass


class NonPositiveInput(KnnMinimaxError, ValueError):
    pass
