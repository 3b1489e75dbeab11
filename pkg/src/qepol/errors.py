"""Exception hierarchy for qepol."""


class QepolError(Exception):
    """Base class for all qepol errors."""


class ValidationError(QepolError, ValueError):
    """A parameter or data structure failed a precondition."""


class FitError(QepolError, RuntimeError):
    """A fit could not be run on the given data."""


class FormatError(QepolError, ValueError):
    """A file does not conform to its declared on-disk format."""


class ConfigError(QepolError, ValueError):
    """A configuration document is malformed or inconsistent."""
