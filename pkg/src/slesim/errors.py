"""Exception hierarchy shared by all modules."""


class SLEError(Exception):
    """Base class for every error raised by slesim."""


class ZeroNorm(SLEError):
    pass


class GridMismatch(SLEError):
    pass


class ConvergenceFailure(SLEError):
    pass


class InsufficientLevels(SLEError):
    pass


class TruncationTooShort(SLEError):
    pass


class SolverBreakdown(SLEError):
    pass


class NormViolation(SLEError):
    """Norm drifted beyond the abort threshold during a realization."""


class WidthCollapse(SLEError):
    pass


class QuadratureFailure(SLEError):
    pass


class CriticalDamping(SLEError):
    pass


class InvertedPopulation(SLEError):
    pass


class FitDivergence(SLEError):
    pass


class NonPositiveWeight(SLEError):
    pass


class TooManyFailures(SLEError):
    pass


class ConfigError(SLEError):
    """Bad configuration; ``line`` and ``field`` locate it in the source file when known."""

    def __init__(self, message, line=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.line = line
        self.field = field


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    pass
