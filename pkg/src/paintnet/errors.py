"""Exception hierarchy shared by every engine module."""


class EngineError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(EngineError):
    """Operands have incompatible or invalid shapes."""


class NumericError(EngineError):
    """An operation produced a non-finite value."""


class ArgumentError(EngineError):
    """A scalar argument lies outside its legal range."""


class ConfigError(EngineError):
    """A configuration value violates a model constraint."""


class DataError(EngineError):
    """Dataset contents are unusable."""


class ManifestError(DataError):
    """Malformed dataset manifest."""


class ImageFormatError(DataError):
    """Byte stream is not a well-formed binary PPM."""


class ImageUnsupportedError(DataError):
    """PPM variant outside the supported subset (maxval must be 255)."""


class CheckpointError(EngineError):
    """Base class for checkpoint I/O failures."""


class CheckpointFormatError(CheckpointError):
    """Checkpoint bytes do not parse."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint format version is not supported."""
