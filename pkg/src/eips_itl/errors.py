"""Exception hierarchy shared by the library and the CLI."""


class EipsItlError(Exception):
    """Base class for all library errors."""


class ConfigError(EipsItlError, ValueError):
    """Invalid parameters or an infeasible configuration."""


class DataError(EipsItlError, ValueError):
    """Malformed or unusable input data."""


class DegenerateError(EipsItlError, ArithmeticError):
    """A descriptor is undefined for the given input (e.g. zero variance)."""


class NumericalError(EipsItlError, ArithmeticError):
    """A numerical routine failed to produce a trustworthy result."""
