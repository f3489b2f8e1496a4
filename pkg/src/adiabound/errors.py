"""Exception types shared across the package."""


class AdiaboundError(Exception):
    """Base class for all package errors."""


class ScheduleRangeError(AdiaboundError, ValueError):
    """A Hamiltonian was requested outside its time span."""


class DegeneracyError(AdiaboundError):
    """The instantaneous spectrum has a gap below the configured floor."""

    def __init__(self, t, pair, gap, floor):
        self.t = float(t)
        self.pair = tuple(int(i) for i in pair)
        self.gap = float(gap)
        self.floor = float(floor)
        super().__init__(
            f"levels {self.pair} nearly degenerate at t={self.t:.6g}: gap {self.gap:.3e} < floor {self.floor:.3e}"
        )


class IntegrationError(AdiaboundError):
    """The adaptive integrator could not reach the requested final time."""

    def __init__(self, message, t_fail):
        self.t_fail = float(t_fail)
        super().__init__(f"{message} (t={self.t_fail:.6g})")


class ConvergenceError(AdiaboundError):
    """A fixed-point iteration did not converge."""


class PreconditionError(AdiaboundError):
    """An operation's documented precondition does not hold."""


class ContractError(AdiaboundError, ValueError):
    """Inputs that should describe the same object disagree (grids, labels, ...)."""


class ValidationError(AdiaboundError, ValueError):
    """A scenario document failed validation; ``path`` names the offending field."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)
