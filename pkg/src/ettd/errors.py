class EttdError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(EttdError, ValueError):
    pass


class BoundsError(EttdError, ValueError):
    pass


class NonConvergence(EttdError, RuntimeError):
    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class TransportError(EttdError, IOError):
    """Annotator endpoint unreachable or returned a retryable failure."""

    def __init__(self, message, retryable=True):
        super().__init__(message)
        self.retryable = retryable


class MalformedResponse(EttdError, ValueError):
    pass


class EmptyGroundTruth(EttdError, ValueError):
    pass


class MissingGroundTruth(EttdError, ValueError):
    pass


class EmptyInput(EttdError, ValueError):
    pass


class CodecError(EttdError, IOError):
    pass


class SchemaError(EttdError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(EttdError, ValueError):
    pass
