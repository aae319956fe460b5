"""Exception hierarchy shared by every module of the package."""


class FwdEgdError(Exception):
    """Base class for all package errors."""


class InvalidGrid(FwdEgdError, ValueError):
    pass


class InvalidDensity(FwdEgdError, ValueError):
    pass


class GridMismatch(FwdEgdError, ValueError):
    pass


class DegenerateMean(FwdEgdError, ArithmeticError):
    """Resource utility evaluated at a density whose mean action is zero."""


class ShiftTooSmall(FwdEgdError, ValueError):
    """An evaluated utility value fell below zero or above its declared bound."""


class InvalidParams(FwdEgdError, ValueError):
    pass


class MaxIterExceeded(FwdEgdError, RuntimeError):
    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class NoSolution(FwdEgdError, ValueError):
    """The exploration-cost equation has no root (e.g. constant utility)."""


class BracketError(FwdEgdError, ValueError):
    pass


class TimestepTooLarge(FwdEgdError, ValueError):
    pass


class Unsupported(FwdEgdError, NotImplementedError):
    pass


class EmptySupport(FwdEgdError, ValueError):
    pass


class IncompatibleRuns(FwdEgdError, ValueError):
    pass


class ConfigError(FwdEgdError, ValueError):
    """Experiment-file problem; carries an optional source position."""

    def __init__(self, message, line=None, column=None):
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + where)
        self.line = line
        self.column = column


class SimulationError(FwdEgdError, RuntimeError):
    """A solver or step failure raised while running a simulation."""

    def __init__(self, step, cause):
        super().__init__(f"step {step}: {type(cause).__name__}: {cause}")
        self.step = step
        self.cause = cause
