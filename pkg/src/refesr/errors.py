"""Exception hierarchy.

Every error carries a short stable ``code`` that the CLI prints as a
machine-parsable prefix (``ERROR:<code>: message``).
"""


class RefESRError(Exception):
    """Base class for all errors raised by this package."""

    code = "error"


class UnreadableFileError(RefESRError):
    code = "unreadable-file"


class UnsupportedFormatError(RefESRError):
    code = "unsupported-format"


class TruncatedPayloadError(RefESRError):
    code = "truncated-payload"


class IOFailureError(RefESRError):
    code = "io-failure"


class DimensionMismatchError(RefESRError):
    code = "dimension-mismatch"


class ChannelCountError(RefESRError):
    code = "channel-count"


class ImageTooSmallError(RefESRError):
    code = "image-too-small"


class InvalidParameterError(RefESRError):
    code = "invalid-parameter"


class UnknownResolverKindError(RefESRError):
    code = "unknown-resolver-kind"


class MissingExternalOutputError(RefESRError):
    code = "missing-external-output"


class EmptyDatasetError(RefESRError):
    code = "empty-dataset"


class ResolverFailureError(RefESRError):
    code = "resolver-failure"


class ConfigError(RefESRError):
    code = "config"
