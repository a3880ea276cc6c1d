"""Dense matrices acting on truncated Fourier coefficient vectors."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .density import CircleDensity, sobolev_weights


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Complex ``(2N+1) x (2N+1)`` matrix indexed by (output mode, input mode).

    Entries are stored so that ``entries[n + N, m + N]`` is the coefficient
    of mode ``n`` in the image of ``exp(2 pi i m x)``.
    """

    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=np.complex128)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] % 2 != 1:
            raise ValueError("operator matrix must be square with odd size 2N+1")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def max_mode(self) -> int:
        return (self.entries.shape[0] - 1) // 2

    @classmethod
    def identity(cls, max_mode: int) -> "OperatorMatrix":
        return cls(np.eye(2 * max_mode + 1, dtype=np.complex128))

    @classmethod
    def zeros(cls, max_mode: int) -> "OperatorMatrix":
        n = 2 * max_mode + 1
        return cls(np.zeros((n, n), dtype=np.complex128))

    @classmethod
    def diagonal(cls, values) -> "OperatorMatrix":
        return cls(np.diag(np.asarray(values, dtype=np.complex128)))

    @classmethod
    def rank_one(cls, column: CircleDensity, row) -> "OperatorMatrix":
        """``g -> column * <row, g>`` with ``<row, g> = sum_m row[m] g_m``."""
        return cls(np.outer(column.coeffs, np.asarray(row, dtype=np.complex128)))

    def apply(self, f: CircleDensity) -> CircleDensity:
        return CircleDensity(self.entries @ f.resized(self.max_mode).coeffs)

    def __matmul__(self, other):
        if isinstance(other, OperatorMatrix):
            return OperatorMatrix(self.entries @ other.entries)
        if isinstance(other, CircleDensity):
            return self.apply(other)
        return NotImplemented

    def __add__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return OperatorMatrix(self.entries + other.entries)

    def __sub__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return OperatorMatrix(self.entries - other.entries)

    def __mul__(self, scalar) -> "OperatorMatrix":
        return OperatorMatrix(self.entries * scalar)

    __rmul__ = __mul__

    def power(self, n: int) -> "OperatorMatrix":
        return OperatorMatrix(np.linalg.matrix_power(self.entries, n))

    def symmetry_defect(self) -> float:
        """``max |A[-n,-m] - conj(A[n,m])|``; zero for real-preserving operators."""
        a = self.entries
        return float(np.max(np.abs(a[::-1, ::-1] - np.conj(a)), initial=0.0))

    def is_real_preserving(self, tol: float = 1e-10) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.entries), initial=0.0)))
        return self.symmetry_defect() <= tol * scale

    def zero_average_block(self) -> np.ndarray:
        """Matrix restricted to input and output modes ``n != 0``."""
        keep = np.arange(self.entries.shape[0]) != self.max_mode
        return self.entries[np.ix_(keep, keep)]

    def mass_row_defect(self) -> float:
        """Largest deviation of row 0 from the mass-preserving row ``e_0``."""
        row = self.entries[self.max_mode].copy()
        row[self.max_mode] -= 1.0
        return float(np.max(np.abs(row)))

    def weighted_norm(self, weight: str = "strong", zero_average: bool = True) -> float:
        """Operator norm induced by a weighted l^1 coefficient norm.

        For weighted l^1 spaces the induced norm is exactly the largest
        weighted column sum ``max_m sum_n w_n |A_nm| / w_m``.
        """
        w = dict(zip(("weak", "strong", "strongest"), sobolev_weights(self.max_mode)))[weight]
        a = np.abs(self.entries)
        if zero_average:
            keep = np.arange(a.shape[0]) != self.max_mode
            a = a[np.ix_(keep, keep)]
            w = w[keep]
        if a.size == 0:
            return 0.0
        return float(np.max((w @ a) / w))

    def to_dict(self) -> dict:
        a = self.entries
        return {
            "max_mode": self.max_mode,
            "entries": [[[float(v.real), float(v.imag)] for v in row] for row in a],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "OperatorMatrix":
        raw = np.asarray(data["entries"], dtype=float)
        return cls(raw[..., 0] + 1j * raw[..., 1])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "OperatorMatrix":
        return cls.from_dict(json.loads(text))

    def __repr__(self):
        return f"OperatorMatrix(max_mode={self.max_mode})"


def weighted_block_norm(block: np.ndarray, max_mode: int, weight: str = "strong") -> float:
    """Induced weighted-l^1 norm of a zero-average block (modes ``n != 0``)."""
    w = dict(zip(("weak", "strong", "strongest"), sobolev_weights(max_mode)))[weight]
    w = np.delete(w, max_mode)
    return float(np.max((w @ np.abs(block)) / w))


def embed_zero_average(block: np.ndarray, max_mode: int) -> OperatorMatrix:
    """Inverse of :meth:`OperatorMatrix.zero_average_block` (mass row/column zero)."""
    size = 2 * max_mode + 1
    keep = np.arange(size) != max_mode
    full = np.zeros((size, size), dtype=np.complex128)
    full[np.ix_(keep, keep)] = block
    return OperatorMatrix(full)
