"""Exception hierarchy shared across the toolkit.

Every error raised by regimelab derives from :class:`RegimelabError`, so
callers can catch one base class at pipeline boundaries while tests can
assert on the specific failure mode.
"""


class RegimelabError(Exception):
    """Base class for all regimelab errors."""


class TransportError(RegimelabError):
    """Network fetch failed after retries (retryable at a higher level)."""


class ParseError(RegimelabError):
    """Provider payload could not be decoded; message names the field."""


class DataQualityError(RegimelabError):
    """A fetched or loaded value violates a domain invariant."""


class EmptySampleError(RegimelabError):
    """An alignment or filter produced zero rows."""


class InsufficientDataError(RegimelabError):
    """Fewer observations than an estimator's minimum window."""


class SchemaError(RegimelabError):
    """Cache or table file does not match the expected header/layout."""


class DegenerateError(RegimelabError):
    """Degenerate input: constant series, zero-variance group, empty cell."""


class ConfigurationError(RegimelabError):
    """Invalid run configuration or parameter set."""


class SingularDesignError(RegimelabError):
    """Regression design matrix is rank deficient."""


class NonConvergenceError(RegimelabError):
    """Optimizer failed to improve over its starting points."""
