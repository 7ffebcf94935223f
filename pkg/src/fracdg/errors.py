"""Exception hierarchy shared by all fracdg modules."""


class FracDGError(Exception):
    """Base class for library errors."""


class DomainError(FracDGError, ValueError):
    """An argument lies outside the domain of the operation."""


class SingularityError(DomainError):
    """Evaluation requested at a point where a kernel is singular."""


class AssemblyError(FracDGError):
    """Finite element assembly hit a degenerate element."""


class DataError(FracDGError):
    """Quadrature of user data produced non-finite values."""


class SolverError(FracDGError):
    """A linear solve failed to reach its tolerance."""

    def __init__(self, message, *, step=None, iterations=None, residual=None):
        super().__init__(message)
        self.step = step
        self.iterations = iterations
        self.residual = residual
