"""Exception types raised by optsub."""


class OptsubError(Exception):
    """Base class for all optsub errors."""


class NotPositiveDefinite(OptsubError, ValueError):
    pass


class DimensionMismatch(OptsubError, ValueError):
    pass


class TooFewRows(OptsubError, ValueError):
    pass


class NonPositiveVariance(OptsubError, ValueError):
    pass


class SingularInformation(OptsubError, ValueError):
    pass


class InvalidDegrees(OptsubError, ValueError):
    pass


class NonConvergence(OptsubError, RuntimeError):
    """Root finder exhausted its iteration budget (a bug, not a user error)."""


class NonPositiveSigma(OptsubError, ValueError):
    pass


class KLargerThanN(OptsubError, ValueError):
    pass


class KTooSmall(OptsubError, ValueError):
    pass


class EmptyInput(OptsubError, ValueError):
    pass


class MissingSeries(OptsubError, ValueError):
    pass


class ConfigError(OptsubError, ValueError):
    pass


class CsvParseError(OptsubError, ValueError):
    """Malformed CSV cell; carries 1-based ``row`` and the column name."""

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
