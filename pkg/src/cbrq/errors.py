"""Exception hierarchy.

Every error raised by this package derives from CbrqError.  The exit_code
attribute groups errors for the command line: 1 for usage problems, 2 for
data problems, 3 for anything unexpected.
"""

from __future__ import annotations


class CbrqError(Exception):
    exit_code = 3


class UsageError(CbrqError):
    """Invalid arguments or configuration."""

    exit_code = 1


class DataError(CbrqError):
    """Invalid input data or data-derived state."""

    exit_code = 2


class PriceParseError(DataError):
    """A price file could not be parsed."""


class ValidationError(DataError):
    """A value violates a documented constraint."""


class MonthGapError(DataError):
    """A month inside the observed span has no price observation."""

    def __init__(self, asset_id: str, month) -> None:
        super().__init__(f"{asset_id}: no price observation covers {month}")
        self.asset_id = asset_id
        self.month = month


class InsufficientDataError(DataError):
    """Too few observations for the requested operation."""


class CaseBaseIntegrityError(DataError):
    """Duplicate or malformed cases in a case base."""


class CaseBaseLoadError(DataError):
    """A persisted case base could not be read back."""

    def __init__(self, message: str, record: int | None = None) -> None:
        super().__init__(message)
        self.record = record


class EmptyCaseBaseError(DataError):
    """No cases are available for the requested query."""


class CaseLookupError(DataError):
    """No case exists for the requested asset and month."""


class UndefinedCorrelationError(DataError):
    """Correlation is undefined: constant input (Pearson) or all-zero input."""


class EmptyRetrievalError(DataError):
    """Retrieval was attempted against an empty case base."""


class PredictionError(DataError):
    """No usable neighbours were found for a query."""


class InternalError(CbrqError):
    """Unexpected internal failure."""

    exit_code = 3
