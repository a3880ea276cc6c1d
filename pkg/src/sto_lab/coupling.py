"""Mean-field coupling maps, their pushforwards, and the barycenter machinery.

Three coupling variants are supported:

* :class:`Translation` -- ``Phi_f(x) = x + delta * int H(y) f(y) dy``
* :class:`GeneralKernel` -- ``Phi_f(x) = x + delta * int H(x, y) f(y) dy``
* :class:`Stochastic` -- jump to a wrapped Gaussian at the barycenter with
  probability ``delta * W_f``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from . import _kernels
from .density import CircleDensity, evaluate
from .exceptions import DegenerateBarycenterError, NotDiffeomorphismError, QuadratureError
from .operator import OperatorMatrix

TWO_PI = 2.0 * np.pi
W_FLOOR = 1e-12
KERNEL_GRID = 256
MASS_DRIFT_TOL = 1e-8


# ---------------------------------------------------------------------------
# coupling configurations
# ---------------------------------------------------------------------------


class CouplingModel:
    """Common base of the three coupling variants."""

    delta: float
    deterministic = True

    def with_delta(self, delta: float) -> "CouplingModel":
        return replace(self, delta=float(delta))


@dataclass(frozen=True, eq=False)
class Translation(CouplingModel):
    """Coupling by the global translation ``delta * int H f``."""

    H: CircleDensity
    delta: float = 0.0

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")

    @property
    def d1_sup(self) -> float:
        return 0.0

    def to_dict(self) -> dict:
        return {"variant": "translation", "delta": self.delta, "H": self.H.to_dict()}


@dataclass(frozen=True, eq=False)
class GeneralKernel(CouplingModel):
    """Pairwise interaction ``H(x, y) = sum_{a,b} H[a, b] e^{2 pi i (a x + b y)}``.

    ``H`` is a ``(2K+1, 2K+1)`` complex array indexed by ``(a + K, b + K)``;
    it is symmetrized so that the kernel is real.
    """

    H: np.ndarray
    delta: float = 0.0

    def __post_init__(self):
        h = np.array(self.H, dtype=np.complex128)
        if h.ndim != 2 or h.shape[0] != h.shape[1] or h.shape[0] % 2 != 1:
            raise ValueError("kernel coefficients must be a square array of odd size")
        h = 0.5 * (h + np.conj(h[::-1, ::-1]))
        h.setflags(write=False)
        object.__setattr__(self, "H", h)
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if self.delta * self.d1_sup >= 1.0:
            raise NotDiffeomorphismError(
                f"delta * sup|d1 H| = {self.delta * self.d1_sup:.4g} >= 1")

    @property
    def max_mode(self) -> int:
        return (self.H.shape[0] - 1) // 2

    def _grid_values(self, order: int) -> np.ndarray:
        k = self.max_mode
        a = np.arange(-k, k + 1)
        xs = np.arange(KERNEL_GRID) / KERNEL_GRID
        ex = np.exp(1j * TWO_PI * np.outer(xs, a))
        c = self.H * ((2j * np.pi * a) ** order)[:, None]
        return (ex @ c @ ex.T).real

    @property
    def d1_sup(self) -> float:
        return float(np.max(np.abs(self._grid_values(1))))

    @property
    def d1_sup2(self) -> float:
        return float(np.max(np.abs(self._grid_values(2))))

    @classmethod
    def from_terms(cls, max_mode: int, terms: dict, delta: float = 0.0) -> "GeneralKernel":
        """Build from ``{(a, b): coefficient}``; mirrored terms are added by symmetry."""
        h = np.zeros((2 * max_mode + 1, 2 * max_mode + 1), dtype=np.complex128)
        for (a, b), value in terms.items():
            h[a + max_mode, b + max_mode] += value
            h[-a + max_mode, -b + max_mode] += np.conj(value)
        return cls(h, delta)

    @classmethod
    def sine_difference(cls, amplitude: float = 1.0, delta: float = 0.0) -> "GeneralKernel":
        """``amplitude * sin(2 pi (x - y))``."""
        return cls.from_terms(1, {(1, -1): -0.5j * amplitude}, delta)

    def to_dict(self) -> dict:
        return {"variant": "general", "delta": self.delta, "max_mode": self.max_mode,
                "re": self.H.real.tolist(), "im": self.H.imag.tolist()}


@dataclass(frozen=True, eq=False)
class Stochastic(CouplingModel):
    """Barycenter-driven jump to a wrapped Gaussian of width ``sigma``."""

    sigma: float
    delta: float = 0.0
    deterministic = False

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")

    @property
    def d1_sup(self) -> float:
        return 0.0

    def to_dict(self) -> dict:
        return {"variant": "stochastic", "delta": self.delta, "sigma": self.sigma}


def coupling_from_dict(data: dict) -> CouplingModel:
    variant = data["variant"]
    if variant == "translation":
        return Translation(CircleDensity.from_dict(data["H"]), float(data["delta"]))
    if variant == "general":
        h = np.asarray(data["re"], dtype=float) + 1j * np.asarray(data["im"], dtype=float)
        return GeneralKernel(h, float(data["delta"]))
    if variant == "stochastic":
        return Stochastic(float(data["sigma"]), float(data["delta"]))
    raise ValueError(f"unknown coupling variant {variant!r}")


# ---------------------------------------------------------------------------
# diffeomorphisms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Shift:
    """Rigid rotation ``x -> x + a``."""

    a: float


@dataclass(frozen=True, eq=False)
class Sampled:
    """``Phi(x) = x + d(x)`` with a trigonometric displacement ``d``."""

    displacement: CircleDensity
    x: np.ndarray
    values: np.ndarray
    derivative: np.ndarray

    @classmethod
    def from_displacement(cls, d: CircleDensity, points: int = 1024) -> "Sampled":
        xs = np.arange(points) / points
        vals = xs + evaluate(d, points)
        der = 1.0 + evaluate(d.derivative(1), points)
        if np.min(der) <= 0:
            raise NotDiffeomorphismError(f"not a diffeomorphism: min Phi' = {np.min(der):.4g}")
        return cls(d, xs, vals, der)

    @property
    def sup_derivative(self) -> float:
        return float(np.max(np.abs(self.derivative)))

    @property
    def sup_second_derivative(self) -> float:
        return float(np.max(np.abs(evaluate(self.displacement.derivative(2), self.x.size))))


def kernel_pairing(H: CircleDensity, f: CircleDensity) -> float:
    """``int H(y) f(y) dy`` by Parseval: ``sum_n H_n f_{-n}``."""
    k = min(H.max_mode, f.max_mode)
    h = H.coeffs[H.max_mode - k:H.max_mode + k + 1]
    g = f.coeffs[f.max_mode - k:f.max_mode + k + 1][::-1]
    return float(np.real(h @ g))


def pairing_row(H: CircleDensity, max_mode: int) -> np.ndarray:
    """Row vector ``v`` with ``v @ coeffs(g) = int H g`` (``v[m] = H_{-m}``)."""
    return H.resized(max_mode).coeffs[::-1].copy()


def mean_field_map(c: CouplingModel, f: CircleDensity):
    """Coupling diffeomorphism ``Phi_f`` for a deterministic coupling."""
    if isinstance(c, Translation):
        return Shift(c.delta * kernel_pairing(c.H, f))
    if isinstance(c, GeneralKernel):
        k = c.max_mode
        fk = f.resized(k).coeffs[::-1]  # f_{-b}
        disp = CircleDensity(c.delta * (c.H @ fk))
        return Sampled.from_displacement(disp)
    raise TypeError("mean_field_map needs a Translation or GeneralKernel coupling")


def pushforward_matrix(d, max_mode: int) -> OperatorMatrix:
    """Fourier matrix of ``[Phi]_*`` truncated to ``|n| <= max_mode``."""
    n = np.arange(-max_mode, max_mode + 1)
    if isinstance(d, Shift):
        return OperatorMatrix.diagonal(np.exp(-1j * TWO_PI * n * d.a))
    if isinstance(d, Sampled):
        sup = d.sup_derivative
        points = 8 * int(np.ceil(max_mode * (1.0 + sup))) + 8 * (2 * d.displacement.max_mode + 1)
        xs = np.arange(points) / points
        phase = xs + evaluate(d.displacement, points)
        return OperatorMatrix(_kernels.oscillatory_matrix(xs, phase, max_mode, max_mode))
    raise TypeError(f"unsupported diffeomorphism {d!r}")


def pushforward(f: CircleDensity, d) -> CircleDensity:
    """Density of ``[Phi]_* f``."""
    if isinstance(d, Shift):
        return CircleDensity(f.coeffs * np.exp(-1j * TWO_PI * f.modes * d.a))
    out = pushforward_matrix(d, f.max_mode).apply(f)
    drift = abs(out.mass - f.mass)
    if drift > MASS_DRIFT_TOL:
        raise QuadratureError(f"pushforward mass drift {drift:.3g}")
    return out


# ---------------------------------------------------------------------------
# barycenter and wrapped Gaussians
# ---------------------------------------------------------------------------


class Barycenter(NamedTuple):
    z: complex
    W: float
    xbar: float
    degenerate: bool


def barycenter_stats(f: CircleDensity) -> Barycenter:
    """First circular moment ``z = int e^{2 pi i x} f``, its weight and direction."""
    z = f.coefficient(-1)
    W = abs(z) ** 2
    if W <= W_FLOOR:
        return Barycenter(z, W, 0.0, True)
    xbar = (np.angle(z) / TWO_PI) % 1.0
    return Barycenter(z, W, float(xbar), False)


def wrapped_gaussian(xbar: float, sigma: float, max_mode: int = 64) -> CircleDensity:
    """Wrapped normal density with mean ``xbar`` and standard deviation ``sigma``."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    n = np.arange(-max_mode, max_mode + 1)
    return CircleDensity(np.exp(-2.0 * np.pi ** 2 * sigma ** 2 * n ** 2) * np.exp(-1j * TWO_PI * n * xbar))


def psi_of(f: CircleDensity, sigma: float, max_mode: int | None = None) -> CircleDensity:
    """The switching target ``psi_f``: wrapped Gaussian at the barycenter of ``f``."""
    b = barycenter_stats(f)
    if b.degenerate:
        raise DegenerateBarycenterError("barycenter undefined at W = 0")
    return wrapped_gaussian(b.xbar, sigma, max_mode or f.max_mode)


def barycenter_weight_row(f: CircleDensity, max_mode: int) -> np.ndarray:
    """Row ``r`` with ``r @ coeffs(g) = dW_f(g) = 2 Re(conj(z) z(g))``."""
    z = f.coefficient(-1)
    row = np.zeros(2 * max_mode + 1, dtype=np.complex128)
    row[max_mode - 1] = np.conj(z)
    row[max_mode + 1] = z
    return row


def psi_dot_matrix(phi: CircleDensity, sigma: float, max_mode: int) -> OperatorMatrix:
    """Derivative of ``phi -> psi_phi`` as a rank-one operator.

    A perturbation ``g`` rotates the barycenter by
    ``Im(conj(z) z(g)) / (2 pi |z|^2)``; the Gaussian translates with it, so
    the response is ``-psi'`` times that angle.  Only the modes ``+-1`` of
    ``g`` enter.
    """
    b = barycenter_stats(phi)
    if b.degenerate:
        raise DegenerateBarycenterError("psi_dot undefined at W = 0")
    psi = wrapped_gaussian(b.xbar, sigma, max_mode)
    n = psi.modes
    z = b.z
    scale = n * psi.coeffs / (2.0 * abs(z) ** 2)
    a = np.zeros((2 * max_mode + 1, 2 * max_mode + 1), dtype=np.complex128)
    a[:, max_mode - 1] = -scale * np.conj(z)
    a[:, max_mode + 1] = scale * z
    return OperatorMatrix(a)
