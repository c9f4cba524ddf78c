"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes, so new exceptions should
subclass one of the three category bases below.
"""


class BlockscoreError(Exception):
    """Base class for all errors raised by this package."""


class DataError(BlockscoreError):
    """Bad input data: malformed files, misaligned corpora, empty corpus."""


class BlocksParseError(DataError):
    """A Blocks.txt file could not be parsed or validated."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class EmptySentenceError(DataError):
    """Normalization was requested for a sentence with zero characters."""


class AlignmentError(DataError):
    """Parallel inputs disagree on line counts."""


class ModelFormatError(DataError):
    """A model file is corrupt, has a wrong version, or fails validation."""


class NumericError(BlockscoreError):
    """Numerical failure during fitting or density evaluation."""
