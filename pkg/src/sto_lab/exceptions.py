"""Exception hierarchy shared by all sto_lab modules."""


class StoLabError(Exception):
    """Base class for all library errors."""


class AliasingError(StoLabError, ValueError):
    """Too few samples to resolve the requested Fourier modes."""


class SymmetryError(StoLabError):
    """A coefficient vector lost Hermitian symmetry (non-real function)."""


class NotExpandingError(StoLabError):
    """Map (possibly composed with the coupling) is not uniformly expanding."""


class NotDiffeomorphismError(StoLabError):
    """Mean-field coupling map has a non-positive derivative somewhere."""


class QuadratureError(StoLabError):
    """A quadrature self-check (mass conservation) failed."""


class DegenerateBarycenterError(StoLabError):
    """Barycenter direction undefined because its weight is below the floor."""


class NotFixedPointError(StoLabError):
    """Formula requires a fixed point but the residual is too large."""
