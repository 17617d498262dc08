"""Exception types shared across the package."""


class EthercastError(Exception):
    """Base class for all package-specific errors."""


class SchemaError(EthercastError):
    """A required column role is not mapped or not present in the header."""


class CsvParseError(EthercastError):
    """A cell could not be parsed; carries the 1-based data row number."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class EmptyInputError(EthercastError):
    """No data rows were found."""


class DuplicateDateError(EthercastError):
    """The same calendar day appears more than once."""


class ContinuityError(EthercastError):
    """Gaps found under the strict daily policy; carries the missing dates."""

    def __init__(self, missing_dates):
        self.missing_dates = list(missing_dates)
        shown = ", ".join(d.isoformat() for d in self.missing_dates[:10])
        more = "" if len(self.missing_dates) <= 10 else f" (+{len(self.missing_dates) - 10} more)"
        super().__init__(f"series has {len(self.missing_dates)} missing day(s): {shown}{more}")


class SplitSpecError(EthercastError):
    """Split ratios are invalid."""


class InsufficientDataError(EthercastError):
    """A segment is too short for the requested windowing."""


class ConfigError(EthercastError):
    """An invalid or unknown configuration key/value."""


class ShapeError(EthercastError):
    """An array shape does not match what a model or loader expects."""


class NumericError(EthercastError):
    """Training produced a non-finite loss."""


class RegistryError(EthercastError):
    """The experiment registry file is corrupted; carries the record index."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message if index is None else f"record {index}: {message}")
        self.index = index
