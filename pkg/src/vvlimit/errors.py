"""Exception types shared across the package.

Each class maps to a distinct process exit code in the command line
driver, so failures in scripts can be told apart without parsing text.
"""
from __future__ import annotations


class VvlimitError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(VvlimitError):
    """Malformed or inconsistent configuration input."""

    exit_code = 2


class PreconditionError(VvlimitError):
    """Inputs violate a documented admissibility or stability condition."""

    exit_code = 3


class BlowUpError(VvlimitError):
    """A trajectory left the finite range (NaN, Inf or threshold crossing)."""

    exit_code = 4

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message)
        self.t = t


class FitError(VvlimitError):
    """Not enough usable data to fit a rate or an envelope constant."""

    exit_code = 5
