"""Bandlimited real functions on the unit circle R/Z and their Sobolev norms.

A :class:`CircleDensity` stores the Fourier coefficients ``c_n`` for
``-N <= n <= N`` of ``f(x) = sum_n c_n exp(2 pi i n x)``.  The coefficient
array is indexed by ``n + N``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import AliasingError, SymmetryError

TWO_PI = 2.0 * np.pi

QUAD_OVERSAMPLE = 8
# |f| has kinks at sign changes, so the rectangle rule is only O(M^-2) there
MIN_QUAD_POINTS = 4096
POINTWISE_TOLERANCE = 1e-8
IMAG_TOLERANCE = 1e-10


class NormTriple(NamedTuple):
    """L^1, W^{1,1} and W^{2,1} norms (or their coefficient surrogates)."""

    weak: float
    strong: float
    strongest: float


@dataclass(frozen=True, eq=False)
class CircleDensity:
    """Truncated Fourier series of a real function on the circle.

    Hermitian symmetry ``c_{-n} = conj(c_n)`` is imposed on construction by
    averaging each coefficient with the conjugate of its mirror.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.complex128).ravel()
        if c.size % 2 != 1 or c.size < 3:
            raise ValueError("coefficient vector must have length 2N+1 with N >= 1")
        c = 0.5 * (c + np.conj(c[::-1]))
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    # -- construction helpers -------------------------------------------------

    @classmethod
    def zeros(cls, max_mode: int) -> "CircleDensity":
        return cls(np.zeros(2 * max_mode + 1, dtype=np.complex128))

    @classmethod
    def constant(cls, value: float, max_mode: int) -> "CircleDensity":
        c = np.zeros(2 * max_mode + 1, dtype=np.complex128)
        c[max_mode] = value
        return cls(c)

    @classmethod
    def from_modes(cls, max_mode: int, modes: dict) -> "CircleDensity":
        """Build from ``{n: c_n}`` for ``n >= 0``; negative modes by symmetry."""
        c = np.zeros(2 * max_mode + 1, dtype=np.complex128)
        for n, value in modes.items():
            n = int(n)
            if abs(n) > max_mode:
                raise ValueError(f"mode {n} exceeds max_mode {max_mode}")
            c[max_mode + n] = value
            if n != 0:
                c[max_mode - n] = np.conj(value)
        return cls(c)

    # -- basic accessors ------------------------------------------------------

    @property
    def max_mode(self) -> int:
        return (self.coeffs.size - 1) // 2

    @property
    def modes(self) -> np.ndarray:
        n = self.max_mode
        return np.arange(-n, n + 1)

    @property
    def mass(self) -> float:
        return float(self.coeffs[self.max_mode].real)

    def coefficient(self, n: int) -> complex:
        if abs(n) > self.max_mode:
            return 0j
        return complex(self.coeffs[self.max_mode + n])

    def resized(self, max_mode: int) -> "CircleDensity":
        """Zero-pad or truncate to a new truncation level."""
        old = self.max_mode
        c = np.zeros(2 * max_mode + 1, dtype=np.complex128)
        k = min(old, max_mode)
        c[max_mode - k:max_mode + k + 1] = self.coeffs[old - k:old + k + 1]
        return CircleDensity(c)

    def derivative(self, order: int = 1) -> "CircleDensity":
        return CircleDensity(self.coeffs * (2j * np.pi * self.modes) ** order)

    def with_mass(self, mass: float) -> "CircleDensity":
        c = self.coeffs.copy()
        c[self.max_mode] = mass
        return CircleDensity(c)

    # -- arithmetic -----------------------------------------------------------

    def _aligned(self, other: "CircleDensity"):
        n = max(self.max_mode, other.max_mode)
        return self.resized(n).coeffs, other.resized(n).coeffs

    def __add__(self, other):
        a, b = self._aligned(other)
        return CircleDensity(a + b)

    def __sub__(self, other):
        a, b = self._aligned(other)
        return CircleDensity(a - b)

    def __mul__(self, scalar):
        return CircleDensity(self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return CircleDensity(-self.coeffs)

    def allclose(self, other: "CircleDensity", atol: float = 1e-12) -> bool:
        a, b = self._aligned(other)
        return bool(np.max(np.abs(a - b)) <= atol)

    # -- serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        half = self.coeffs[self.max_mode:]
        return {"max_mode": self.max_mode, "re": half.real.tolist(), "im": half.imag.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "CircleDensity":
        n = int(data["max_mode"])
        half = np.asarray(data["re"], dtype=float) + 1j * np.asarray(data["im"], dtype=float)
        if half.size != n + 1:
            raise ValueError("expected max_mode+1 coefficients c_0..c_N")
        return cls(np.concatenate([np.conj(half[:0:-1]), half]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "CircleDensity":
        return cls.from_dict(json.loads(text))

    def __repr__(self):
        return f"CircleDensity(max_mode={self.max_mode}, mass={self.mass:.6g})"


def trig_polynomial(max_mode: int, const: float = 0.0, cos: dict | None = None,
                    sin: dict | None = None) -> CircleDensity:
    """``const + sum a_n cos(2 pi n x) + sum b_n sin(2 pi n x)`` as a density."""
    modes = {0: complex(const)}
    for n, a in (cos or {}).items():
        modes[int(n)] = modes.get(int(n), 0) + 0.5 * a
    for n, b in (sin or {}).items():
        modes[int(n)] = modes.get(int(n), 0) - 0.5j * b
    return CircleDensity.from_modes(max_mode, modes)


def quadrature_points(max_mode: int) -> int:
    return max(QUAD_OVERSAMPLE * max_mode, MIN_QUAD_POINTS)


def synthesize(samples, max_mode: int) -> CircleDensity:
    """Fourier analysis of samples taken at ``x_j = j / M``, truncated to ``|n| <= N``."""
    samples = np.asarray(samples, dtype=float).ravel()
    m = samples.size
    if m < 2 * max_mode + 1:
        raise AliasingError(f"{m} samples cannot resolve modes up to {max_mode} (need >= {2 * max_mode + 1})")
    spectrum = np.fft.fft(samples) / m
    n = np.arange(-max_mode, max_mode + 1)
    return CircleDensity(spectrum[n % m])


def evaluate(f: CircleDensity, m: int) -> np.ndarray:
    """Values of ``f`` at ``x_j = j / m``; modes above ``m/2`` alias as sampling dictates."""
    if m < 1:
        raise ValueError("need at least one sample point")
    spectrum = np.zeros(m, dtype=np.complex128)
    np.add.at(spectrum, f.modes % m, f.coeffs)
    values = np.fft.ifft(spectrum) * m
    scale = max(1.0, float(np.sum(np.abs(f.coeffs))))
    if np.max(np.abs(values.imag)) > IMAG_TOLERANCE * scale:
        raise SymmetryError("evaluation produced a non-negligible imaginary part")
    return values.real


def grid(m: int) -> np.ndarray:
    return np.arange(m) / m


def l1_norm(f: CircleDensity, m: int | None = None) -> float:
    m = m or quadrature_points(f.max_mode)
    return float(np.mean(np.abs(evaluate(f, m))))


def analytic_norms(f: CircleDensity) -> NormTriple:
    """Rectangle-rule L^1 norms of f, f', f'' combined into the Sobolev triple."""
    m = quadrature_points(f.max_mode)
    ik = 2j * np.pi * f.modes
    spectrum = np.zeros((3, m), dtype=np.complex128)
    idx = f.modes % m
    for order in range(3):
        np.add.at(spectrum[order], idx, f.coeffs * ik ** order)
    values = np.fft.ifft(spectrum, axis=1) * m
    l1 = np.mean(np.abs(values.real), axis=1)
    strong = l1[0] + l1[1]
    return NormTriple(float(l1[0]), float(strong), float(strong + l1[2]))


def sobolev_weights(max_mode: int):
    """Coefficient weights ``(1, 1 + 2 pi |n|, 1 + 2 pi |n| + (2 pi n)^2)``."""
    n = np.abs(np.arange(-max_mode, max_mode + 1))
    w_s = 1.0 + TWO_PI * n
    return np.ones_like(w_s), w_s, w_s + (TWO_PI * n) ** 2


def coefficient_norms(f: CircleDensity) -> NormTriple:
    """Weighted l^1 coefficient sums; each dominates the matching analytic norm."""
    a = np.abs(f.coeffs)
    w, s, ss = sobolev_weights(f.max_mode)
    return NormTriple(float(a @ w), float(a @ s), float(a @ ss))


def project_zero_average(f: CircleDensity) -> CircleDensity:
    return f.with_mass(0.0)


def is_probability(f: CircleDensity, tol: float = POINTWISE_TOLERANCE) -> bool:
    if abs(f.mass - 1.0) > 1e-9:
        return False
    return float(np.min(evaluate(f, QUAD_OVERSAMPLE * f.max_mode))) >= -tol


def minimum_value(f: CircleDensity) -> float:
    return float(np.min(evaluate(f, quadrature_points(f.max_mode))))
