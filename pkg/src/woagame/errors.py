"""Exception hierarchy.

Every failure the library raises derives from :class:`WoaError`, so callers
(the CLI in particular) can map whole families to exit codes.
"""

from __future__ import annotations


class WoaError(Exception):
    """Base class for all library errors."""


# model ---------------------------------------------------------------------


class ModelError(WoaError, ValueError):
    pass


class NonPositiveVolatility(ModelError):
    pass


class UnboundedInterval(ModelError):
    pass


class NonFiniteCoefficient(ModelError):
    pass


class GridError(WoaError, ValueError):
    pass


class DuplicatePoints(GridError):
    pass


class PointOutsideInterval(GridError):
    pass


class NonNestedSchedule(GridError):
    pass


class AssumptionError(WoaError, ValueError):
    """Payoff data violate the standing assumptions; carries the report."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


# stopping ------------------------------------------------------------------


class NegativeRate(WoaError, ValueError):
    pass


class OutOfRange(WoaError, ValueError):
    pass


class MissingLocalTime(WoaError, KeyError):
    pass


class PathTooShort(WoaError, RuntimeError):
    pass


# analytics -----------------------------------------------------------------


class QuadratureFailure(WoaError, RuntimeError):
    pass


class IntegrationBlowup(WoaError, RuntimeError):
    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval


class DegenerateBracket(WoaError, ValueError):
    pass


class MethodDisagreement(WoaError, RuntimeError):
    """The two sojourn-primitive methods disagree beyond tolerance."""

    def __init__(self, message, identity=None, ode=None):
        super().__init__(message)
        self.identity = identity
        self.ode = ode


# engine / solver -----------------------------------------------------------


class SingularSystem(WoaError, RuntimeError):
    pass


class NoConvergence(WoaError, RuntimeError):
    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class NotConverged(WoaError, RuntimeError):
    def __init__(self, message, best_residual=None, trace=None, best=None):
        super().__init__(message)
        self.best_residual = best_residual
        self.trace = trace or []
        self.best = best


class MassDeficit(WoaError, RuntimeError):
    pass


class NonProbabilityInput(WoaError, ValueError):
    pass


# montecarlo ----------------------------------------------------------------


class BandTooWide(WoaError, ValueError):
    pass


# cli_io --------------------------------------------------------------------


class SchemaError(WoaError, ValueError):
    def __init__(self, message, path=None, line=None):
        loc = f"{path}:{line}: " if line is not None else (f"{path}: " if path else "")
        super().__init__(loc + message)
        self.path = path
        self.line = line


class ExpressionError(WoaError, ValueError):
    def __init__(self, message, token=None):
        super().__init__(message if token is None else f"{message} (at {token!r})")
        self.token = token


class IoError(WoaError, OSError):
    pass
