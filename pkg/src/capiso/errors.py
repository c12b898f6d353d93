"""Exception hierarchy shared by all modules."""


class CapisoError(Exception):
    """Base class for all package errors."""


class DomainError(CapisoError, ValueError):
    """An argument lies outside the domain of the operation."""


class ValidationError(CapisoError, ValueError):
    """A set representation violates its invariants."""


class ResourceError(CapisoError):
    """A configured budget (cells, evaluations) would be exceeded."""


class SingularityError(CapisoError, ArithmeticError):
    """Evaluation at a singular point (for example the symmetry axis)."""


class PreconditionError(CapisoError):
    """A gate or precondition of a construction is not met."""


class SearchError(CapisoError):
    """An optimizer did not converge; ``best`` holds the best point found."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class NumericError(CapisoError, ArithmeticError):
    """A linear solve stagnated; ``residual`` holds the last residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class GenerationError(CapisoError):
    """A perturbation family left its admissible amplitude range."""

    def __init__(self, message, eps_max=None):
        super().__init__(message)
        self.eps_max = eps_max


class InvariantError(CapisoError):
    """A computed object violates a structural invariant."""


class ParseError(CapisoError, ValueError):
    """A set or config file is malformed; ``line`` and ``offset`` locate it."""

    def __init__(self, message, line=None, offset=None):
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", offset {offset}" if offset is not None else "") + ")"
        super().__init__(message + where)
        self.line = line
        self.offset = offset
