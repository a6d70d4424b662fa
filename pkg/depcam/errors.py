"""
Exception hierarchy.

The CLI maps these onto exit codes: usage-type errors exit 2, everything
else that derives from DepcamError exits 1.
"""
from __future__ import annotations
from typing import TYPE_CHECKING, Optional

if TYPE_CHECKING:
    from depcam.models import FitReport


class DepcamError(Exception):
    """Base class for every error raised by depcam."""


class UsageError(DepcamError, ValueError):
    """Bad arguments: shape mismatches, invalid counts, missing inputs."""


class DegenerateInputError(DepcamError, ValueError):
    """Input that is well-formed but cannot be processed, e.g. rank-deficient."""


class DataParseError(DepcamError):
    """A data file that does not parse as a binary matrix."""

    def __init__(self, message: str, *, row: Optional[int] = None, column: Optional[int] = None):
        super().__init__(message)
        self.row    = row
        self.column = column


class NumericalError(DepcamError, ArithmeticError):
    """A quantity that must be finite came out NaN or infinite."""


class FitAbortedError(NumericalError):
    """A fit stopped on a numerical error; `report` holds the partial trace."""

    def __init__(self, message: str, report: "FitReport"):
        super().__init__(message)
        self.report = report


USAGE_ERRORS = (UsageError, DegenerateInputError)
