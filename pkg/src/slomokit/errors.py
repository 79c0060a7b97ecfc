"""Exception hierarchy shared across the toolkit.

Every error that reaches a user-facing surface (CLI, HTTP) carries a stable
machine-readable ``code`` so scripts can branch on failures without parsing
prose.
"""


class SlomoError(Exception):
    """Base class for all toolkit errors."""

    code = "E_GENERIC"


class ValidationError(SlomoError):
    """Bad argument values (ranges, ratios, shapes declared by the caller)."""

    code = "E_VALIDATION"


class DimensionMismatchError(ValidationError):
    """Two rasters/fields that must share dimensions do not."""

    code = "E_DIMENSION"


class EmptySequenceError(ValidationError):
    """An operation that needs at least one frame got none."""

    code = "E_EMPTY"


class MediaError(SlomoError):
    """Problems reading or writing media."""

    code = "E_MEDIA"


class Y4mParseError(MediaError):
    """Malformed Y4M stream; ``offset`` is the byte position of the problem."""

    code = "E_Y4M_PARSE"

    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class TruncationError(MediaError):
    """A payload ended early; records expected vs actual byte counts."""

    code = "E_TRUNCATED"

    def __init__(self, message, expected, actual):
        super().__init__(f"{message}: expected {expected} bytes, got {actual}")
        self.expected = expected
        self.actual = actual


class UnsupportedFormatError(MediaError):
    code = "E_UNSUPPORTED_FORMAT"


class MissingFrameError(MediaError):
    """A frame directory has a gap; ``index`` is the first missing index."""

    code = "E_MISSING_FRAME"

    def __init__(self, message, index):
        super().__init__(message)
        self.index = index


class DecoderConfigError(MediaError):
    """No external decoder command is configured for container input."""

    code = "E_DECODER_CONFIG"


class DecoderRunError(MediaError):
    """The external decoder child failed; ``diagnostics`` holds its stderr."""

    code = "E_DECODER_RUN"

    def __init__(self, message, diagnostics=""):
        super().__init__(message)
        self.diagnostics = diagnostics


class DegenerateInputError(ValidationError):
    """Input too small for the algorithm (e.g. frame smaller than one block)."""

    code = "E_DEGENERATE"


class BoundsError(ValidationError):
    """A rectangle falls outside the frame; ``axis`` names the overflow axis."""

    code = "E_BOUNDS"

    def __init__(self, message, axis=None):
        super().__init__(message)
        self.axis = axis


class BackendError(SlomoError):
    """An interpolation backend failed; ``backend`` names it."""

    code = "E_BACKEND"

    def __init__(self, message, backend=None):
        super().__init__(message)
        self.backend = backend


class CapabilityError(BackendError):
    """Backend asked to synthesize a time point it does not support."""

    code = "E_CAPABILITY"


class ProtocolError(BackendError):
    """External backend violated the pipe protocol; ``field`` names the spot."""

    code = "E_PROTOCOL"

    def __init__(self, message, field=None, backend=None):
        super().__init__(message, backend=backend)
        self.field = field


class ContractViolationError(BackendError):
    """External backend answered with a structurally valid but wrong payload."""

    code = "E_CONTRACT"
