"""The self-consistent transfer operator and its fixed points."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .coupling import (
    CouplingModel,
    GeneralKernel,
    Stochastic,
    Translation,
    barycenter_stats,
    barycenter_weight_row,
    mean_field_map,
    pairing_row,
    psi_dot_matrix,
    pushforward,
    pushforward_matrix,
    wrapped_gaussian,
)
from .density import CircleDensity, analytic_norms
from .exceptions import QuadratureError
from .maps import ExpandingMapSpec, expansion_audit, transfer_matrix
from .operator import OperatorMatrix

log = logging.getLogger(__name__)

MASS_DRIFT_TOL = 1e-9
NEWTON_COND_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class StoModel:
    """An expanding map, a coupling and a Fourier truncation level."""

    map: ExpandingMapSpec
    coupling: CouplingModel
    max_mode: int

    def __post_init__(self):
        if int(self.max_mode) < 1:
            raise ValueError("max_mode must be at least 1")
        object.__setattr__(self, "max_mode", int(self.max_mode))
        shift = self.coupling.delta * self.coupling.d1_sup
        sigma, c3 = expansion_audit(self.map, shift)
        object.__setattr__(self, "sigma_prime", sigma)
        object.__setattr__(self, "c3_bound", c3)

    @cached_property
    def transfer(self) -> OperatorMatrix:
        return transfer_matrix(self.map, self.max_mode)

    @property
    def delta(self) -> float:
        return self.coupling.delta

    def with_delta(self, delta: float) -> "StoModel":
        return StoModel(self.map, self.coupling.with_delta(delta), self.max_mode)

    def with_map(self, T: ExpandingMapSpec) -> "StoModel":
        return StoModel(T, self.coupling, self.max_mode)

    def lebesgue(self) -> CircleDensity:
        return CircleDensity.constant(1.0, self.max_mode)

    def to_dict(self) -> dict:
        return {"map": self.map.to_dict(), "coupling": self.coupling.to_dict(),
                "max_mode": self.max_mode}


def sto_apply(m: StoModel, f: CircleDensity) -> CircleDensity:
    """One step ``f -> L_{delta, f}(f)`` of the self-consistent operator."""
    f = f.resized(m.max_mode)
    c = m.coupling
    if c.deterministic:
        out = m.transfer.apply(pushforward(f, mean_field_map(c, f)))
    else:
        out = _stochastic_apply(m, f)
    drift = abs(out.mass - f.mass)
    if drift > MASS_DRIFT_TOL:
        raise QuadratureError(f"mass drift {drift:.3g} exceeds {MASS_DRIFT_TOL}")
    if drift > 0:
        log.debug("renormalizing mass drift %.3g", drift)
    return out.with_mass(f.mass)


def _stochastic_apply(m: StoModel, f: CircleDensity) -> CircleDensity:
    c = m.coupling
    b = barycenter_stats(f)
    weight = c.delta * b.W
    if b.degenerate or weight == 0.0:
        return m.transfer.apply(f)
    psi = wrapped_gaussian(b.xbar, c.sigma, m.max_mode)
    if weight <= 1.0:
        return (1.0 - weight) * m.transfer.apply(f) + (weight * f.mass) * psi
    return f.mass * psi


def frozen_operator(m: StoModel, f: CircleDensity) -> OperatorMatrix:
    """Matrix of ``g -> L_{delta, f}(g)`` with the coupling frozen at ``f``."""
    f = f.resized(m.max_mode)
    c = m.coupling
    if c.deterministic:
        return m.transfer @ pushforward_matrix(mean_field_map(c, f), m.max_mode)
    b = barycenter_stats(f)
    weight = c.delta * b.W
    if b.degenerate or weight == 0.0:
        return m.transfer
    psi = wrapped_gaussian(b.xbar, c.sigma, m.max_mode)
    if weight <= 1.0:
        return (1.0 - weight) * m.transfer + weight * _mass_column(psi)
    return _mass_column(psi)


def coupling_response(m: StoModel, f: CircleDensity) -> OperatorMatrix:
    """Derivative of ``g -> L_{delta, f + g}(f)`` at ``g = 0``."""
    f = f.resized(m.max_mode)
    N = m.max_mode
    c = m.coupling
    if isinstance(c, Translation):
        frozen = m.transfer @ pushforward_matrix(mean_field_map(c, f), N)
        u = -c.delta * frozen.apply(f.derivative(1))
        return OperatorMatrix.rank_one(u, pairing_row(c.H, N))
    if isinstance(c, GeneralKernel):
        raise NotImplementedError("coupling response is not assembled for x-dependent kernels")
    if not isinstance(c, Stochastic):
        raise TypeError(f"unsupported coupling {c!r}")
    b = barycenter_stats(f)
    weight = c.delta * b.W
    if b.degenerate or weight == 0.0:
        return OperatorMatrix.zeros(N)
    psi_dot = psi_dot_matrix(f, c.sigma, N)
    if weight <= 1.0:
        psi = wrapped_gaussian(b.xbar, c.sigma, N)
        jump = psi * f.mass - m.transfer.apply(f)
        return (c.delta * OperatorMatrix.rank_one(jump, barycenter_weight_row(f, N))
                + (weight * f.mass) * psi_dot)
    return f.mass * psi_dot


def _mass_column(psi: CircleDensity) -> OperatorMatrix:
    N = psi.max_mode
    e0 = np.zeros(2 * N + 1)
    e0[N] = 1.0
    return OperatorMatrix.rank_one(psi, e0)


def jacobian(m: StoModel, f: CircleDensity) -> OperatorMatrix:
    """Frechet derivative of the operator at an arbitrary density ``f``."""
    return frozen_operator(m, f) + coupling_response(m, f)


@dataclass
class FixedPointReport:
    h: CircleDensity
    residual: float
    iterations: int
    history: list = field(default_factory=list)
    solver: str = "picard"
    converged: bool = False

    def to_dict(self) -> dict:
        return {
            "h": self.h.to_dict(),
            "residual": self.residual,
            "iterations": self.iterations,
            "history": list(self.history),
            "solver": self.solver,
            "converged": self.converged,
        }

    def history_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "residual"])
        for i, r in enumerate(self.history):
            w.writerow([i, repr(float(r))])
        return buf.getvalue()


def residual(m: StoModel, f: CircleDensity) -> float:
    """``||L(f) - f||`` in W^{1,1}."""
    return analytic_norms(sto_apply(m, f) - f.resized(m.max_mode)).strong


def _picard(m, f, tol, max_iter, history):
    for it in range(max_iter):
        lf = sto_apply(m, f)
        r = analytic_norms(lf - f).strong
        history.append(r)
        if r <= tol:
            return f, r, it, True
        f = lf
    return f, history[-1], max_iter, False


def fixed_point(m: StoModel, f0: CircleDensity, tol: float = 1e-10, max_iter: int = 500,
                solver: str = "picard") -> FixedPointReport:
    """Locate a fixed density by Picard iteration or Newton's method.

    Newton solves ``(I - dL) D = L(f) - f`` on the zero-average modes and
    drops back to Picard when the Jacobian is unavailable, ill-conditioned
    (condition number above 1e12) or a step increases the residual.
    Non-convergence is reported, not raised.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    f = f0.resized(m.max_mode)
    if abs(f.mass - 1.0) > 1e-9:
        raise ValueError("initial density must have unit mass")
    history: list = []
    if solver == "picard":
        h, r, it, ok = _picard(m, f, tol, max_iter, history)
        return FixedPointReport(h, r, it, history, "picard", ok)
    if solver != "newton":
        raise ValueError(f"unknown solver {solver!r}")

    N = m.max_mode
    used = "newton"
    for it in range(max_iter):
        lf = sto_apply(m, f)
        F = lf - f
        r = analytic_norms(F).strong
        if history and r > history[-1]:
            log.info("Newton step increased the residual; switching to Picard")
            used = "newton->picard"
            break
        history.append(r)
        if r <= tol:
            return FixedPointReport(f, r, it, history, used, True)
        try:
            J = jacobian(m, f).zero_average_block()
        except NotImplementedError:
            used = "newton->picard"
            break
        M = np.eye(J.shape[0]) - J
        if np.linalg.cond(M) > NEWTON_COND_LIMIT:
            log.info("I - dL ill-conditioned; switching to Picard")
            used = "newton->picard"
            break
        step = np.linalg.solve(M, np.delete(F.coeffs, N))
        f = f + CircleDensity(np.insert(step, N, 0.0))
    else:
        return FixedPointReport(f, history[-1], max_iter, history, used, False)
    done = len(history)
    h, r, it, ok = _picard(m, f, tol, max(max_iter - done, 1), history)
    return FixedPointReport(h, r, done + it, history, used, ok)
