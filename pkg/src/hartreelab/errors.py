"""Exception types shared across the package."""


class HartreeLabError(Exception):
    """Base class for all package errors."""


class StructuralError(HartreeLabError, ValueError):
    """Shapes, grids or dimensions that do not fit together."""


class DomainError(HartreeLabError, ValueError):
    """A parameter outside the domain where an operation is defined."""


class CoverageError(HartreeLabError, ValueError):
    """A query outside the time range covered by a record."""


class BoxTooSmallError(HartreeLabError, RuntimeError):
    """Mass reached the boundary shell of the periodic box.

    ``breach_time`` is the first recorded time at which the boundary-shell
    mass exceeded the guard threshold; ``record`` holds everything recorded
    up to and including that time.
    """

    def __init__(self, message, breach_time, boundary_mass, record=None):
        super().__init__(message)
        self.breach_time = breach_time
        self.boundary_mass = boundary_mass
        self.record = record


class TruncationError(HartreeLabError, RuntimeError):
    """A Fock-space computation leaked mass into the cutoff sector."""


class InfeasibleError(HartreeLabError, RuntimeError):
    """Requested problem size exceeds the configured feasibility limit."""


class KrylovBreakdown(HartreeLabError, RuntimeError):
    """The Lanczos exponential failed to reach tolerance."""
