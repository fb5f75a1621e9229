"""Exception hierarchy shared by the simulator, trainers and the bridge."""


class SwingbenchError(Exception):
    """Base class for all package errors."""


class NumericalError(SwingbenchError, RuntimeError):
    """Divergence, non-convergence or a non-finite simulation state."""

    def __init__(self, message, t=None, report=None):
        if t is not None:
            message = f"{message} (t = {t:.6f} s)"
        super().__init__(message)
        self.t = t
        self.report = report


class ProtocolError(SwingbenchError):
    """Violation of the lockstep bridge protocol."""


class ConfigError(SwingbenchError, ValueError):
    """Bad configuration key, value or scenario selection."""
