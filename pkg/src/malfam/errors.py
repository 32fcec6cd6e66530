"""Exception types raised across the attribution pipeline."""


class MalfamError(Exception):
    """Base class for all domain errors; CLI maps these to exit code 1."""


class NoLabelError(MalfamError):
    """No scanner produced any label for the sample."""


class NoCandidateError(MalfamError):
    """Every label token was filtered out by the stop-list or length rule."""


class InvalidParamsError(MalfamError):
    """Caller passed parameters outside an operation's stated domain."""


class MalformedJsonError(MalfamError):
    """Report bytes are not a JSON document."""


class SchemaMismatchError(MalfamError):
    """JSON parsed but none of the known report layouts matched."""


class ReportNotFoundError(MalfamError):
    """The requested report does not exist at the source."""


class RateLimitedError(MalfamError):
    """Report source kept refusing with 429 after honoring Retry-After."""

    def __init__(self, message, retry_after=None):
        super().__init__(message)
        self.retry_after = retry_after


class NetworkFailureError(MalfamError):
    """Transport-level failure while fetching a report."""


class EmptyUrlError(MalfamError):
    """URL reduced to an empty string after stripping."""


class EmptyCorpusError(MalfamError):
    """An operation that needs at least one sample received none."""


class DegenerateLabelsError(MalfamError):
    """Fewer than two distinct class labels."""


class DimensionMismatchError(MalfamError):
    """Input vector width does not match the model's feature dimension."""


class FoldTooSmallError(MalfamError):
    """A class has fewer members than the number of cross-validation folds."""


class EmptyFileError(MalfamError):
    """Zero-length byte sequence where at least one byte is required."""


class WindowTooShortError(MalfamError):
    """Byte sequence shorter than the sliding window."""


class NotNormalizedError(MalfamError):
    """Image dimensions differ from the corpus's normalized side."""


class AllChannelsDroppedError(MalfamError):
    """A drop set must leave at least one feature channel."""
