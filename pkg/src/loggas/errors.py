"""Exception types shared across the package."""


class LogGasError(Exception):
    """Base class for all package errors."""


class CarrierMismatch(LogGasError):
    pass


class MultiplePoint(LogGasError):
    pass


class NoPointRight(LogGasError):
    pass


class InsufficientPoints(LogGasError):
    pass


class QuadratureFailure(LogGasError):
    pass


class EigensolverFailure(LogGasError):
    pass


class EdgeWindow(LogGasError):
    pass


class DegenerateInterval(LogGasError):
    pass


class PreconditionViolated(LogGasError):
    pass


class CouplingError(LogGasError):
    pass


class UnsortedInput(LogGasError):
    pass
