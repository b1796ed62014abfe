"""Exception types shared across the package."""


class DegenerateRiskError(ValueError):
    """Portfolio has zero risk, or its contributions cannot be normalized."""


class InfeasibleBoundsError(ValueError):
    """Weight bounds admit no portfolio summing to one."""


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap."""


class GuardError(ValueError):
    """Request refused because it would blow up combinatorially."""


class DataError(ValueError):
    """Malformed or unusable input data."""
