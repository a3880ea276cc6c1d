"""The differential of the self-consistent operator at a fixed point.

``dL = L_{delta,h} + dL_{delta,h}``: the frozen linear operator plus the
response of the operator family to a change in the coupling argument.
Also finite-difference validation, contraction reports and Lasota-Yorke
fits for the assembled matrices.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import nnls

from .density import POINTWISE_TOLERANCE, CircleDensity, analytic_norms, minimum_value
from .ensembles import make_rng, random_zero_average
from .exceptions import NotFixedPointError
from .operator import OperatorMatrix, weighted_block_norm
from .sto import StoModel, coupling_response, frozen_operator, residual, sto_apply

log = logging.getLogger(__name__)

FIXED_POINT_GATE = 1e-8
FD_SLOPE_MIN = 0.9
FD_FLOOR = 1e-11
LY_MARGIN = 1.1
LY_LAMBDA_GRID = np.linspace(0.02, 0.98, 49)


def _zero_average_vectors(gs) -> np.ndarray:
    """Stack zero-average densities as columns of the ``n != 0`` block."""
    cols = []
    for g in gs:
        c = g.coeffs
        cols.append(np.delete(c, g.max_mode))
    return np.array(cols).T


def _as_density(vec: np.ndarray) -> CircleDensity:
    N = vec.size // 2
    return CircleDensity(np.insert(vec, N, 0.0))


def _strong_norms(block_vectors: np.ndarray) -> np.ndarray:
    return np.array([analytic_norms(_as_density(v)).strong for v in block_vectors.T])


def _weak_norms(block_vectors: np.ndarray) -> np.ndarray:
    return np.array([analytic_norms(_as_density(v)).weak for v in block_vectors.T])


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


def frozen_linear_matrix(m: StoModel, h: CircleDensity) -> OperatorMatrix:
    """``L_{delta,h}``: the transfer operator with the coupling frozen at ``h``."""
    return frozen_operator(m, h)


def _check_fixed(m: StoModel, h: CircleDensity, gate: float) -> None:
    r = residual(m, h)
    if r > gate:
        raise NotFixedPointError(f"residual {r:.3g} exceeds the fixed-point gate {gate:.0e}")


def coupling_derivative_matrix(m: StoModel, h: CircleDensity,
                               gate: float = FIXED_POINT_GATE) -> OperatorMatrix:
    """``dL_{delta,h}``, the derivative of ``g -> L_{delta, h + g}(h)``.

    For translation coupling this is the rank-one operator
    ``g -> -delta (int H g) T_* Lambda_h(h')``.  The sign is negative:
    moving the shift by ``+s`` moves ``h(x - a)`` by ``-s h'(x - a)``.
    """
    _check_fixed(m, h, gate)
    return coupling_response(m, h)


def differential_matrix(m: StoModel, h: CircleDensity,
                        gate: float = FIXED_POINT_GATE) -> OperatorMatrix:
    return frozen_linear_matrix(m, h) + coupling_derivative_matrix(m, h, gate)


def zero_average_leak(A: OperatorMatrix) -> float:
    """Largest mass produced from a zero-average input (row 0 outside column 0)."""
    row = np.delete(A.entries[A.max_mode], A.max_mode)
    return float(np.max(np.abs(row), initial=0.0))


# ---------------------------------------------------------------------------
# finite-difference validation
# ---------------------------------------------------------------------------


@dataclass
class FdReport:
    steps: list
    errors: list
    slope: float | None
    shrunk: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        if max(self.errors, default=0.0) <= FD_FLOOR:
            return True
        return self.slope is not None and self.slope >= FD_SLOPE_MIN

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def fd_validate_differential(m: StoModel, h: CircleDensity, g: CircleDensity,
                             steps=(1e-2, 1e-3, 1e-4), A: OperatorMatrix | None = None,
                             max_shrink: int = 10) -> FdReport:
    """Compare difference quotients of the operator with ``dL(g)`` in L^1.

    Steps for which ``h + t g`` is not a probability density are divided by
    10 until it is; the replacements are recorded in ``shrunk``.
    Errors below ``FD_FLOOR`` carry no slope information, so the slope is
    fitted only when every error exceeds it.
    """
    if abs(g.mass) > 1e-12:
        raise ValueError("direction must have zero average")
    if A is None:
        A = differential_matrix(m, h)
    h = h.resized(m.max_mode)
    g = g.resized(m.max_mode)
    base = sto_apply(m, h)
    dg = A.apply(g)
    used, errors, shrunk = [], [], []
    for t in steps:
        if not 0 < t <= 1:
            raise ValueError("steps must lie in (0, 1]")
        t0 = t
        for _ in range(max_shrink):
            if minimum_value(h + t * g) >= -POINTWISE_TOLERANCE:
                break
            t /= 10.0
        if t != t0:
            shrunk.append([t0, t])
        q = (sto_apply(m, h + t * g) - base) * (1.0 / t)
        used.append(t)
        errors.append(analytic_norms(q - dg).weak)
    slope = None
    if len(used) >= 2 and min(errors) > FD_FLOOR:
        slope = float(np.polyfit(np.log(used), np.log(errors), 1)[0])
    return FdReport(used, errors, slope, shrunk)


# ---------------------------------------------------------------------------
# contraction
# ---------------------------------------------------------------------------


@dataclass
class ContractionReport:
    n_max: int
    proxy_norms: list
    empirical_norms: list
    spectral_radius: float
    first_contracting_n: int | None

    def to_dict(self) -> dict:
        return asdict(self)

    def table_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "proxy_norm", "empirical_norm"])
        for i, (p, e) in enumerate(zip(self.proxy_norms, self.empirical_norms), start=1):
            w.writerow([i, repr(p), repr(e)])
        return buf.getvalue()


def contraction_report(A: OperatorMatrix, n_max: int = 8, ensemble=64, rng=None) -> ContractionReport:
    """Strong-norm contraction of ``A^n`` on zero-average densities.

    ``ensemble`` is either a count of random directions (drawn from ``rng``)
    or an explicit list of zero-average densities.
    """
    N = A.max_mode
    B = A.zero_average_block()
    if isinstance(ensemble, int):
        rng = make_rng(rng)
        ensemble = random_zero_average(N, ensemble, rng)
    G = _zero_average_vectors([g.resized(N) for g in ensemble]) if ensemble else None
    g_norms = _strong_norms(G) if G is not None else None
    proxy, empirical = [], []
    P = np.eye(B.shape[0], dtype=complex)
    X = G
    for _ in range(n_max):
        P = B @ P
        proxy.append(weighted_block_norm(P, N, "strong"))
        if X is not None:
            X = B @ X
            empirical.append(float(np.max(_strong_norms(X) / g_norms)))
    eig = np.linalg.eigvals(B) if B.size else np.zeros(1)
    first = next((i + 1 for i, p in enumerate(proxy) if p < 1.0), None)
    return ContractionReport(n_max, proxy, empirical, float(np.max(np.abs(eig))), first)


# ---------------------------------------------------------------------------
# Lasota-Yorke fit
# ---------------------------------------------------------------------------


@dataclass
class LyFit:
    lambda_tilde: float
    C4: float
    C5: float
    residual: float
    success: bool = True
    validated: bool | None = None
    max_violation: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def bound(self, n: int, strong: float, weak: float) -> float:
        return self.lambda_tilde ** n * self.C4 * strong + self.C5 * weak


def fit_ly_data(n, s, s0, w0, margin: float = LY_MARGIN, grid=LY_LAMBDA_GRID) -> LyFit:
    """Fit ``s <= lam^n C4 s0 + C5 w0`` over a grid of ``lam``.

    For each ``lam`` the pair ``(C4, C5)`` is a nonnegative least-squares fit
    of ``s / s0``; both are then inflated by the worst violation and by
    ``margin``.  The ``lam`` whose inflated bound has the smallest RMS gap
    to the data wins.
    """
    n, s, s0, w0 = (np.asarray(a, dtype=float) for a in (n, s, s0, w0))
    if not np.any(s > 1e-14 * s0):
        return LyFit(float(grid[0]), 0.0, 0.0, 0.0)
    y = s / s0
    best = None
    for lam in grid:
        X = np.column_stack([lam ** n, w0 / s0])
        coef, _ = nnls(X, y)
        pred = X @ coef
        active = y > 0
        if np.any(pred[active] <= 0):
            continue
        worst = float(np.max(y[active] / pred[active]))
        coef = coef * max(1.0, worst) * margin
        res = float(np.sqrt(np.mean((X @ coef - y) ** 2)))
        if best is None or res < best[0]:
            best = (res, float(lam), float(coef[0]), float(coef[1]))
    if best is None:
        return LyFit(float("nan"), float("inf"), float("inf"), float("inf"), success=False)
    res, lam, c4, c5 = best
    return LyFit(lam, c4, c5, res)


def _trajectories(A: OperatorMatrix, gs, n_max: int):
    B = A.zero_average_block()
    G = _zero_average_vectors([g.resized(A.max_mode) for g in gs])
    s0 = _strong_norms(G)
    w0 = _weak_norms(G)
    rows = []
    X = G
    for k in range(1, n_max + 1):
        X = B @ X
        rows.append(_strong_norms(X))
    return s0, w0, np.array(rows)


def ly_fit(A: OperatorMatrix, n_max: int = 20, ensemble: int = 64, rng=None,
           validation: int = 32, margin: float = LY_MARGIN) -> LyFit:
    """Fit a Lasota-Yorke inequality for the powers of ``A`` on zero-average densities.

    Fails when the worst-case strong norm grows over the second half of the
    horizon; such growth rules out any ``lam < 1``.
    """
    rng = make_rng(rng)
    N = A.max_mode
    train = random_zero_average(N, ensemble, rng, probes=True)
    s0, w0, S = _trajectories(A, train, n_max)
    ratios = np.max(S / s0, axis=1)
    half = n_max // 2
    growing = ratios[-1] > 1.0 and ratios[-1] > ratios[half - 1] * (1.0 + 1e-9)
    ns = np.repeat(np.arange(1, n_max + 1), len(train))
    fit = fit_ly_data(ns, S.ravel(), np.tile(s0, n_max), np.tile(w0, n_max), margin)
    if growing:
        fit.success = False
    if validation:
        held = random_zero_average(N, validation, rng)
        v0, vw, V = _trajectories(A, held, n_max)
        bound = np.array([[fit.bound(k, a, b) for a, b in zip(v0, vw)]
                          for k in range(1, n_max + 1)])
        excess = V - bound
        fit.max_violation = float(np.max(excess))
        fit.validated = bool(np.all(excess <= 1e-12 * np.maximum(bound, 1.0)))
    return fit
