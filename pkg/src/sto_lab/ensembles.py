"""Random test densities.

Zero-average directions have coefficient variance proportional to
``(1 + |n|)^-4`` and unit W^{1,1} norm.  Optional single-mode probes
``cos(2 pi m x + theta)`` for ``m = 1..N`` cover the slowest directions,
which a smooth random ensemble almost never visits.
"""
from __future__ import annotations

import numpy as np

from .density import CircleDensity, analytic_norms, evaluate, quadrature_points


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed)
    return np.random.default_rng(np.random.SeedSequence(seed))


def _from_positive(c_pos: np.ndarray, mass: float = 0.0) -> CircleDensity:
    return CircleDensity(np.concatenate([np.conj(c_pos[::-1]), [mass], c_pos]))


def random_zero_average(max_mode: int, count: int, rng, probes: bool = False,
                        max_active: int | None = None) -> list:
    """Zero-average densities normalized to ``||g||_{W^{1,1}} = 1``."""
    rng = make_rng(rng)
    n = np.arange(1, max_mode + 1)
    scale = (1.0 + n) ** -2.0
    if max_active is not None:
        scale = np.where(n <= max_active, scale, 0.0)
    out = []
    for _ in range(count):
        c = (rng.standard_normal(max_mode) + 1j * rng.standard_normal(max_mode)) * scale / np.sqrt(2)
        g = _from_positive(c)
        out.append(g * (1.0 / analytic_norms(g).strong))
    if probes:
        for m in range(1, max_mode + 1):
            c = np.zeros(max_mode, dtype=complex)
            c[m - 1] = 0.5 * np.exp(2j * np.pi * rng.uniform())
            g = _from_positive(c)
            out.append(g * (1.0 / analytic_norms(g).strong))
    return out


def random_probability(max_mode: int, count: int, rng, amplitude: float = 0.5,
                       modes: int = 4) -> list:
    """Densities ``1 + amplitude * u`` with ``u`` low-mode and ``sup|u| = 1``."""
    if not 0 <= amplitude < 1:
        raise ValueError("amplitude must lie in [0, 1)")
    rng = make_rng(rng)
    out = []
    for u in random_zero_average(max_mode, count, rng, max_active=min(modes, max_mode)):
        sup = float(np.max(np.abs(evaluate(u, quadrature_points(max_mode)))))
        out.append(CircleDensity.constant(1.0, max_mode) + u * (amplitude / sup))
    return out


def sup_normalized(u: CircleDensity) -> CircleDensity:
    sup = float(np.max(np.abs(evaluate(u, quadrature_points(u.max_mode)))))
    return u * (1.0 / sup) if sup > 0 else u
