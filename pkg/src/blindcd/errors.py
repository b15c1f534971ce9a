class BlindCDError(Exception):
    """Base class for library errors."""


class EigenSolverError(BlindCDError):
    pass


class GraphFormatError(BlindCDError, ValueError):
    pass


class FilterError(BlindCDError, ValueError):
    pass


class NotLowPassError(FilterError):
    pass


class RankDeficientError(BlindCDError, ValueError):
    pass


class ConditionViolation(BlindCDError):
    """A theorem hypothesis does not hold on the given instance."""


class DivergenceError(BlindCDError, FloatingPointError):
    pass


class ConfigError(BlindCDError, ValueError):
    pass
