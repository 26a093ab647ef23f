"""Exception types shared across the toolkit.

Plain OS-level failures (unreadable/unwritable files) are left to the
built-in OSError hierarchy; everything domain-specific gets a class here
so callers can tell malformed input from misuse.
"""


class LatentAudioError(Exception):
    """Base class for all toolkit errors."""


class MalformedWavError(LatentAudioError):
    """WAV file with a broken header or inconsistent chunk sizes."""


class UnsupportedEncodingError(LatentAudioError):
    """WAV encoding other than PCM16 or IEEE float32."""


class RateMismatchError(LatentAudioError):
    """Operation on buffers whose sample rates disagree."""


class TooShortError(LatentAudioError):
    """Audio shorter than one analysis or model window."""


class ShapeMismatchError(LatentAudioError):
    """Vector or matrix with the wrong dimensions for the model."""


class EmptyDatasetError(LatentAudioError):
    """Training requested on an empty window collection."""


class FormatVersionMismatchError(LatentAudioError):
    """Container file written by an unsupported format version."""


class CorruptFileError(LatentAudioError):
    """Container file that is truncated or fails its checksum."""


class BadStepError(LatentAudioError):
    """Non-positive step size for stepwise interpolation."""


class CurveLengthMismatchError(LatentAudioError):
    """Interpolation curve length differs from the window count."""


class EmptyInputError(LatentAudioError):
    """Map training requested on an empty thumbnail collection."""


class ConfigMismatchError(LatentAudioError):
    """Thumbnail and map built from different feature recipes."""


class EmptySpecError(LatentAudioError):
    """Curve specification with no content."""


class NonFiniteLossError(LatentAudioError):
    """Training loss became NaN or infinite."""
