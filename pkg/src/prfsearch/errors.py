"""Exception types shared across the package.

Filesystem failures are left to the stdlib OSError; everything that is a
property of the data or of a backend gets a distinct class here so callers
(and the CLI exit-code mapping) can tell them apart.
"""


class PrfSearchError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(PrfSearchError):
    """Vectors of different dimensionality were combined or compared."""


class DuplicateId(PrfSearchError):
    """A passage id appeared more than once where ids must be unique."""


class UnknownId(PrfSearchError):
    """A requested passage id is not present in the store/corpus."""


class FormatError(PrfSearchError):
    """A binary artifact does not conform to its declared format."""


class ParseError(PrfSearchError):
    """A text artifact (run, qrels, corpus) failed to parse.

    Carries the 1-based line number of the offending line.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyQuery(PrfSearchError):
    """The original query has zero tokens."""


class EmptyFeedback(PrfSearchError):
    """No feedback passages (or no feedback tokens) were available."""


class EmptyInput(PrfSearchError):
    """An aggregation was asked to combine zero ranked lists."""


class DegenerateInput(PrfSearchError):
    """A statistic is undefined for the given inputs."""


class BackendUnavailable(PrfSearchError):
    """A remote scorer backend cannot be reached or reports unavailability."""


class ProtocolError(PrfSearchError):
    """A remote scorer backend answered outside the wire contract."""


class UnknownQuery(PrfSearchError):
    """A run references a query with no judgments at all."""
