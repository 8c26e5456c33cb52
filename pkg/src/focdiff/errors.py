"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError (and any ValueError raised
during input validation) is a usage problem, NumericalFailure and ModelError
mean a computation could not be trusted, and InvariantViolation is reserved
for the one thing that must never happen silently: a transformed equation
whose displacement-variance coefficient differs from the untransformed one.
"""


class ConfigError(ValueError):
    """Invalid user-supplied configuration or arguments."""


class NumericalFailure(RuntimeError):
    """A numerical routine did not converge or failed a self-consistency check."""


class AlgebraError(ArithmeticError):
    """Illegal operation on an equation (absent target term, degenerate pivot)."""


class ModelError(RuntimeError):
    """A moment system is inconsistent with the polynomial long-time ansatz."""


class InvariantViolation(RuntimeError):
    """The displacement-variance coefficient changed under a derivative script."""
