"""Exception types shared across the package."""


class FcradarError(Exception):
    """Base class for all errors raised by fcradar."""


class InvalidArgumentError(FcradarError, ValueError):
    """An argument is outside its documented domain."""


class SeriesTooShortError(FcradarError, ValueError):
    """A series has too few observations for the requested operation."""

    def __init__(self, series_id: str, length: int, required: int, what: str = ""):
        self.series_id = series_id
        self.length = length
        self.required = required
        detail = f" for {what}" if what else ""
        super().__init__(
            f"series {series_id!r} has {length} observations, "
            f"needs at least {required}{detail}"
        )


class ReconciliationError(FcradarError, ValueError):
    """Forecasts and actuals do not line up (missing pairs, horizon gaps)."""


class UndefinedScoreError(FcradarError, ArithmeticError):
    """A score is undefined for the given inputs (e.g. zero scaling term)."""


class DuplicateKeyError(FcradarError, ValueError):
    """Duplicate key encountered in an input file or table."""


class CsvFormatError(FcradarError, ValueError):
    """An input file does not match the expected layout."""


class SchemaError(FcradarError, ValueError):
    """A serialized report does not match the expected schema."""
