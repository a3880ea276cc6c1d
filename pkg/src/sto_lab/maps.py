"""Expanding circle maps ``T(x) = k x + eps p(x) mod 1`` and their transfer operators."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import _kernels
from .density import CircleDensity, trig_polynomial
from .exceptions import NotExpandingError, QuadratureError
from .operator import OperatorMatrix

log = logging.getLogger(__name__)

AUDIT_GRID = 4096
MAX_PERTURBATION_MODE = 8
MASS_ROW_TOL = 1e-10
QUAD_FACTOR = 8


@dataclass(frozen=True, eq=False)
class ExpandingMapSpec:
    """Degree-``k`` circle map with a trigonometric perturbation.

    The perturbation ``p`` is any real trigonometric polynomial with modes
    ``|n| <= 8``; the map is ``T(x) = k x + epsilon * p(x)`` (mod 1).
    """

    degree: int
    perturbation: CircleDensity = field(default_factory=lambda: CircleDensity.zeros(1))
    epsilon: float = 0.0

    def __post_init__(self):
        if int(self.degree) < 2:
            raise ValueError("degree must be at least 2")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.perturbation.max_mode > MAX_PERTURBATION_MODE:
            p = self.perturbation
            high = np.abs(p.modes) > MAX_PERTURBATION_MODE
            if np.any(np.abs(p.coeffs[high]) > 0):
                raise ValueError("perturbation modes above 8 are not supported")
            object.__setattr__(self, "perturbation", p.resized(MAX_PERTURBATION_MODE))
        object.__setattr__(self, "degree", int(self.degree))

    @classmethod
    def linear(cls, degree: int) -> "ExpandingMapSpec":
        return cls(degree)

    @classmethod
    def sine_perturbed(cls, degree: int, epsilon: float, mode: int = 1) -> "ExpandingMapSpec":
        """``k x + eps sin(2 pi mode x)``."""
        return cls(degree, trig_polynomial(max(mode, 1), sin={mode: 1.0}), epsilon)

    @property
    def sigma_prime(self) -> float:
        """Minimum of ``T'`` (audited with no coupling contribution)."""
        return _min_derivative(self)

    def to_dict(self) -> dict:
        return {"degree": self.degree, "epsilon": self.epsilon,
                "perturbation": self.perturbation.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "ExpandingMapSpec":
        return cls(int(data["degree"]), CircleDensity.from_dict(data["perturbation"]),
                   float(data["epsilon"]))


def _perturbation_derivative(p: CircleDensity, x, order: int):
    c = p.coeffs * (2j * np.pi * p.modes) ** order
    return _kernels.trig_eval(c, np.atleast_1d(np.asarray(x, dtype=float)))


def map_eval(T: ExpandingMapSpec, x, order: int = 0, lifted: bool = False):
    """Value (``order=0``) or exact derivative of the map at ``x``.

    For ``order=0`` the result is reduced mod 1 unless ``lifted`` is set; the
    lift ``k x + eps p(x)`` is what phase computations need.
    """
    if order not in (0, 1, 2, 3):
        raise ValueError("order must be 0, 1, 2 or 3")
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    pert = _perturbation_derivative(T.perturbation, xs, order) * T.epsilon
    if order == 0:
        out = T.degree * xs + pert
        if not lifted:
            out = np.mod(out, 1.0)
    elif order == 1:
        out = T.degree + pert
    else:
        out = pert
    return float(out[0]) if scalar else out


def _min_derivative(T: ExpandingMapSpec) -> float:
    xs = np.arange(AUDIT_GRID) / AUDIT_GRID
    d = map_eval(T, xs, 1)
    if T.epsilon == 0 or not np.any(T.perturbation.coeffs):
        return float(np.min(d))
    j = int(np.argmin(d))
    h = 1.0 / AUDIT_GRID
    res = minimize_scalar(lambda t: map_eval(T, t, 1), bounds=(xs[j] - h, xs[j] + h),
                          method="bounded", options={"xatol": 1e-12})
    return float(min(res.fun, d[j]))


def expansion_audit(T: ExpandingMapSpec, shift_bound: float = 0.0):
    """Lower bound on ``|(T o Phi)'|`` over couplings with ``delta sup|d1 H| <= shift_bound``.

    Returns ``(sigma_prime, c3_bound)`` where ``c3_bound`` is the largest of
    ``|T|, |T'|, |T''|, |T'''|`` (lifted) on the audit grid.
    """
    if shift_bound < 0:
        raise ValueError("shift_bound must be nonnegative")
    sigma = _min_derivative(T) * (1.0 - shift_bound)
    if sigma <= 1.0:
        raise NotExpandingError(
            f"not uniformly expanding for this coupling strength (sigma'={sigma:.6g})")
    xs = np.arange(AUDIT_GRID) / AUDIT_GRID
    c3 = max(float(np.max(np.abs(map_eval(T, xs, order, lifted=True)))) for order in range(4))
    return sigma, c3


def _assemble(T: ExpandingMapSpec, max_mode: int, points: int) -> OperatorMatrix:
    xs = np.arange(points) / points
    return OperatorMatrix(_kernels.oscillatory_matrix(xs, map_eval(T, xs, 0, lifted=True),
                                                      max_mode, max_mode))


def transfer_matrix(T: ExpandingMapSpec, max_mode: int) -> OperatorMatrix:
    """Fourier matrix of the transfer operator ``T_*``.

    ``A[n, m] = int exp(2 pi i m x) exp(-2 pi i n T(x)) dx`` by the rectangle
    rule on ``8 (N + k N)`` points, so ``coeffs(T_* f) = A coeffs(f)``.
    """
    points = QUAD_FACTOR * (max_mode + T.degree * max_mode)
    A = _assemble(T, max_mode, points)
    if A.mass_row_defect() > MASS_ROW_TOL:
        log.warning("mass row defect %.3g; reassembling with %d points",
                    A.mass_row_defect(), 2 * points)
        A = _assemble(T, max_mode, 2 * points)
        if A.mass_row_defect() > MASS_ROW_TOL:
            raise QuadratureError("transfer matrix fails the mass-preservation check")
    return A

