"""Exception hierarchy shared by every gccfp module."""


class GCCFPError(Exception):
    """Base class for all errors raised by gccfp."""


class ParseError(GCCFPError):
    """A data file could not be parsed.

    Carries the path and the 1-based line number of the offending line.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class BoundsError(GCCFPError):
    """A vertex or feature index falls outside the declared dimensions."""


class ShapeError(GCCFPError):
    """Matrix or vector dimensions are inconsistent."""


class ConsistencyError(GCCFPError):
    """Internal invariant violated, e.g. an edge incident to a degree-0 vertex."""


class NumericOverflowError(GCCFPError):
    """A computed quantity is not finite."""

    def __init__(self, message, term=None):
        self.term = term
        super().__init__(message)


class ValidationError(GCCFPError):
    """A parameter set or configuration violates its invariants."""


class SizeError(GCCFPError):
    """Instance too large for an intentionally bounded routine."""
