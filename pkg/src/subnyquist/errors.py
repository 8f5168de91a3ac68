"""Exception types shared across the package."""


class SubNyquistError(Exception):
    """Base class for every error raised by this package."""


class FrameError(SubNyquistError, ValueError):
    """A frame, spectrum or support set violates its invariants."""


class SymmetryError(FrameError):
    """A spectrum that should be Hermitian is not, beyond tolerance."""


class BandPlanError(SubNyquistError, ValueError):
    """A band plan or RF signal spec is invalid for the frame length."""


class PackingError(BandPlanError):
    """The requested bands cannot be placed with the required gaps."""


class MaskError(SubNyquistError, ValueError):
    """A sampling mask is invalid or does not match its frame."""


class ConfigError(SubNyquistError, ValueError):
    """A recovery or sweep configuration violates its invariants."""


class DivergenceError(SubNyquistError, RuntimeError):
    """Recovery blew up; the trace up to the failing iteration is attached."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace
