"""Exception hierarchy shared across the package.

Each class maps to a distinct CLI exit code (see cli.py).
"""


class DptsimError(Exception):
    """Base class for all package errors."""


class ParameterError(DptsimError, ValueError):
    """Invalid physical or numerical parameters."""


class ConfigError(DptsimError):
    """Unreadable or inconsistent configuration / device files."""


class CapacityError(DptsimError):
    """Requested problem size exceeds a configured cap."""


class NumericalFailure(DptsimError):
    """A propagation or linear-algebra step failed its error bounds."""
