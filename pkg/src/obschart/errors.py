"""Exception hierarchy shared by every module."""


class ObsChartError(Exception):
    """Base class for all errors raised by obschart."""


class DomainError(ObsChartError, ValueError):
    """A parameter or data point lies outside the declared domain/support."""


class EvaluationError(ObsChartError, ArithmeticError):
    """A model or map produced a non-finite value at an interior point."""


class NumericError(ObsChartError, ArithmeticError):
    """A numerical routine failed (non-convergence, indefiniteness, ...)."""


class UndeterminedOrder(NumericError):
    """The log-log slope fit did not pass the integer-order gates.

    The partially filled :class:`~obschart.arcs.OrderEstimate` is attached as
    ``diagnostics`` so callers can log or retry with a smaller ``t0``.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class ConfigError(ObsChartError, ValueError):
    """Malformed or semantically invalid job configuration."""

    def __init__(self, message, path=None, line=None):
        where = []
        if path:
            where.append(f"at '{path}'")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.message = message
        self.path = path
        self.line = line


class JobError(ObsChartError):
    """A valid job could not be executed (model construction, accuracy floor)."""


class AccuracyFloorError(JobError):
    """Expectation accuracy cannot resolve the requested numeric floor."""
