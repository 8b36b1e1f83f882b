class ValidationError(ValueError):
    """Input violates a documented precondition (bad state, channel, parameter)."""


class DivergenceError(ArithmeticError):
    """Requested quantity is undefined because the Fisher information diverges."""


class ConvergenceError(RuntimeError):
    """Numerical search failed to converge."""
