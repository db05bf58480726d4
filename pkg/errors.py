# errors.py
# © 2025 Colt McVey
# Exception hierarchy shared by every simulator module.


class SimulatorError(Exception):
    """Base class for all errors raised by the simulator."""


class InvalidParam(SimulatorError, ValueError):
    pass


class ConnectivityFailure(SimulatorError):
    pass


class ConvergenceFailure(SimulatorError):
    pass


class DimensionMismatch(SimulatorError, ValueError):
    pass


class ProtocolError(SimulatorError):
    pass


class EmptyDataset(SimulatorError, ValueError):
    pass


class SolveFailure(SimulatorError):
    """Raised when the reference-optimum solver misses its tolerance."""
    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class EmptyBatch(SimulatorError, ValueError):
    pass


class SamplerExhausted(SimulatorError):
    pass


class SamplesNotRetained(SimulatorError):
    pass


class MissingReferenceOptimum(SimulatorError):
    pass


class LengthMismatch(SimulatorError, ValueError):
    pass


class BadMagic(SimulatorError, ValueError):
    pass


class TruncatedFile(SimulatorError, ValueError):
    pass


class CountMismatch(SimulatorError, ValueError):
    pass


class EmptyResult(SimulatorError):
    pass


class ConfigError(SimulatorError):
    """A configuration problem, tagged with the offending field when known."""
    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)
