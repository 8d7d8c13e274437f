"""Exception types raised across the package."""


class FlexSchedError(Exception):
    """Base class for all package errors."""


class InvalidJob(FlexSchedError, ValueError):
    pass


class InvalidStart(FlexSchedError, ValueError):
    pass


class DimensionMismatch(FlexSchedError, ValueError):
    pass


class DomainViolation(FlexSchedError, ValueError):
    pass


class InfeasibleConfig(FlexSchedError, ValueError):
    pass


class InvalidArgs(FlexSchedError, ValueError):
    pass


class ParseError(FlexSchedError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class WindowError(FlexSchedError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NotConverged(FlexSchedError, RuntimeError):
    """The relaxation solver ran out of iterations.

    ``best`` holds the best iterate found (a ``RelaxSolution``) and ``gap``
    its duality-gap certificate.
    """

    def __init__(self, message, best=None, gap=float("nan")):
        super().__init__(message)
        self.best = best
        self.gap = gap


class NonDifferentiable(FlexSchedError, ValueError):
    """Cost has a kink at the evaluation point.

    ``prices`` carries the subgradient-interval midpoints, ``kinks`` a boolean
    mask of the affected slots.
    """

    def __init__(self, message, prices=None, kinks=None):
        super().__init__(message)
        self.prices = prices
        self.kinks = kinks


class NotRectangular(FlexSchedError, ValueError):
    pass


class InfeasibleInput(FlexSchedError, ValueError):
    pass


class InvalidInput(FlexSchedError, ValueError):
    pass


class EmptySupport(FlexSchedError, ValueError):
    pass


class BudgetExceeded(FlexSchedError, RuntimeError):
    def __init__(self, message, bound=None):
        super().__init__(message)
        self.bound = bound
