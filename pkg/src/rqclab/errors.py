"""Exception types shared across the package."""


class RqcError(Exception):
    """Base class for library errors."""


class InvalidArgument(RqcError, ValueError):
    pass


class ResourceLimitError(RqcError):
    pass


class DegenerateInputError(RqcError):
    pass


class FitImpossibleError(RqcError):
    pass


class CalibrationError(RqcError):
    pass


class DepthGuardError(CalibrationError):
    """Depth test ran past its iteration guard without stopping."""


class ModelMismatchError(RqcError):
    pass


class CircuitFormatError(RqcError, ValueError):
    def __init__(self, message, location=None):
        self.location = location
        if location is not None:
            message = f"{message} (at {location})"
        super().__init__(message)
