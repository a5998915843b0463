"""Exception taxonomy shared by all modules."""


class RieszgasError(Exception):
    """Base class for package errors."""


class DomainError(RieszgasError):
    """Input outside the mathematical domain (kernel at 0, coincident points)."""


class GeometryError(RieszgasError):
    """A geometric precondition is violated; the message names the hypothesis."""


class InfeasibleError(GeometryError):
    """A constructive scan found no admissible candidate."""


class NumericError(RieszgasError):
    """Quadrature failed to converge or produced a non-finite value."""


class RefinementError(NumericError):
    """A quadrature grid is too coarse relative to the truncation scale."""


class UnsupportedModelError(RieszgasError):
    """Model outside the analytic catalogue (no general obstacle-problem solver)."""


class NormalizationError(RieszgasError):
    """Input violates a normalization requirement (e.g. non-unit lattice density)."""
