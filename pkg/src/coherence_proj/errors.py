"""Typed errors raised across the package."""


class CoherenceError(Exception):
    """Base class for all package errors."""


class DomainError(CoherenceError, ValueError):
    """A point lies outside the domain of a generator or divergence."""


class SingularMatrix(CoherenceError, ValueError):
    """A quadratic generator matrix is not invertible."""


class SolverError(CoherenceError, RuntimeError):
    """An iterative solver failed to reach its tolerances."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class Infeasible(CoherenceError, ValueError):
    """A constraint set is empty."""


class NotInvolution(CoherenceError, ValueError):
    """An operation needs an involution but got a longer cycle."""


class MissingConstant(CoherenceError, ValueError):
    """A bound needs a strong-convexity or smoothness constant that is absent."""


class ConfigError(CoherenceError, ValueError):
    """A configuration document does not match the schema."""

    def __init__(self, message, path="$"):
        super().__init__(f"{path}: {message}")
        self.path = path


class UnknownSuite(CoherenceError, KeyError):
    """No verification suite is registered under the requested name."""
