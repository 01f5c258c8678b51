"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid or missing configuration (unknown variable, bad range, missing key)."""


class ShapeError(ValueError):
    """Array dimensions disagree with what a parameter set or schema expects."""


class FittingError(ValueError):
    """A scaler could not be fitted, e.g. a feature with no observations."""


class TrainingError(RuntimeError):
    """Training produced a non-finite loss or gradient."""


class FetchError(RuntimeError):
    """Network request failed. ``status`` is the HTTP status, or None for transport errors."""

    retriable = True

    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status


class OfflineError(FetchError):
    """A network call was attempted while running offline."""

    retriable = False


class ParseError(ValueError):
    """Malformed payload. ``path`` locates the offending element."""

    def __init__(self, message, path=""):
        super().__init__(f"{message} (at {path})" if path else message)
        self.path = path
