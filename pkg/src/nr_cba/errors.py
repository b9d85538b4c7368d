"""Exception types raised across the package."""


class NrCbaError(Exception):
    """Base class for all package errors."""


class ConfigError(NrCbaError, ValueError):
    """Invalid configuration value or file."""

    def __init__(self, message, field=None, line=None):
        self.reason = message
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)


class NonPowerOfTwo(NrCbaError, ValueError):
    pass


class InvalidCoefficient(NrCbaError, ValueError):
    pass


class InvalidPmi(NrCbaError, ValueError):
    pass


class NegativeTax(NrCbaError, ValueError):
    pass


class UnknownKind(NrCbaError, ValueError):
    pass


class MissingState(NrCbaError, ValueError):
    pass


class BaselineZero(NrCbaError, ZeroDivisionError):
    pass


class SchemaMismatch(NrCbaError, ValueError):
    pass


class ReservoirMismatch(NrCbaError, ValueError):
    pass


class DegenerateSpectrum(NrCbaError, ValueError):
    pass
