"""Exception types raised across the package."""

from __future__ import annotations


class AuthorProfError(Exception):
    """Base class for all package errors."""


class DataError(AuthorProfError):
    """Input data is malformed or inconsistent (CLI exit code 2)."""


class ConfigError(AuthorProfError, ValueError):
    pass


class SelfLoopError(AuthorProfError, ValueError):
    pass


class UnknownAuthorError(AuthorProfError, KeyError):
    pass


class DegenerateGraphError(AuthorProfError, ValueError):
    pass


class FormatError(DataError):
    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}"
        if line is not None:
            where = f"{where}:{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)
        self.path = path
        self.line = line


class UnknownLabelError(FormatError):
    pass


class EmptyCorpusError(AuthorProfError, ValueError):
    pass


class ShapeError(AuthorProfError, ValueError):
    pass


class DegenerateLabelsError(AuthorProfError, ValueError):
    pass


class DegenerateSplitError(DegenerateLabelsError):
    pass


class TooFewSamplesError(AuthorProfError, ValueError):
    pass


class WeightError(AuthorProfError, ValueError):
    pass


class ZeroVarianceError(AuthorProfError, ArithmeticError):
    """All paired differences are equal, so the t statistic is undefined.

    ``identical`` is True when every difference is exactly zero.
    """

    def __init__(self, mean_difference: float):
        self.mean_difference = mean_difference
        self.identical = mean_difference == 0.0
        kind = "identical" if self.identical else "degenerate-significant"
        super().__init__(f"zero variance in paired differences ({kind})")


class DegenerateInputError(AuthorProfError, ValueError):
    pass
