"""Exception types shared across the package."""


class NetmixError(Exception):
    """Base class for all package errors."""


class GenerationFailed(NetmixError):
    pass


class Infeasible(NetmixError):
    """No feasible point exists (or a certificate says so)."""


class Unsupported(NetmixError):
    """Operation requires a feature the input does not have (e.g. linear costs)."""


class BudgetExhausted(NetmixError):
    """An iterative search ran out of its iteration budget.

    This is never a proof of infeasibility.
    """

    def __init__(self, message, state=None, iterations=0):
        super().__init__(message)
        self.state = state
        self.iterations = iterations


class NoConvergence(NetmixError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class TooLarge(NetmixError):
    pass


class RoundingInfeasible(NetmixError):
    pass


class ExpansionFailed(NetmixError):
    pass


class FieldTooSmall(NetmixError):
    pass


class RealizationFailed(NetmixError):
    pass
