"""Experiments that exercise the contraction, regularity and memory-loss statements.

Every experiment takes its randomness from a seed or a ``numpy`` generator,
fans independent work out through :func:`parallel_map`, and merges results
by index so reports do not depend on scheduling.
"""
from __future__ import annotations

import csv
import io
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels
from .coupling import GeneralKernel, Translation, barycenter_stats, wrapped_gaussian
from .density import (
    POINTWISE_TOLERANCE,
    CircleDensity,
    analytic_norms,
    evaluate,
    l1_norm,
    minimum_value,
    quadrature_points,
)
from .differential import (
    FIXED_POINT_GATE,
    contraction_report,
    coupling_derivative_matrix,
    differential_matrix,
    fit_ly_data,
    frozen_linear_matrix,
)
from .ensembles import make_rng, random_probability, random_zero_average, sup_normalized
from .exceptions import NotFixedPointError, StoLabError
from .maps import ExpandingMapSpec, map_eval
from .operator import OperatorMatrix
from .sto import StoModel, fixed_point, frozen_operator, residual, sto_apply

log = logging.getLogger(__name__)

THREADS_ENV = "STO_LAB_THREADS"
DECAY_FIT_START = 3
TRACE_FLOOR = 1e-12
# absolute W^{1,1} round-off level of one operator application at N <= 256
NOISE_FLOOR = 1e-11
GAMMA_MIN = 1e-3
DIVERGENCE_FACTOR = 10.0


# ---------------------------------------------------------------------------
# parallel plumbing
# ---------------------------------------------------------------------------


def resolve_threads(threads: int | None = None) -> int:
    """Worker cap: explicit value, else ``STO_LAB_THREADS``, else 1."""
    if threads is None:
        env = os.environ.get(THREADS_ENV, "").strip()
        threads = int(env) if env else 1
    return max(1, int(threads))


def parallel_map(fn, items, threads: int | None = None) -> list:
    """``[fn(x) for x in items]`` on up to ``threads`` workers, in input order."""
    items = list(items)
    workers = min(resolve_threads(threads), max(len(items), 1))
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _child_rngs(rng, count: int) -> list:
    seeds = make_rng(rng).integers(0, 2 ** 63 - 1, size=count)
    return [np.random.default_rng(int(s)) for s in seeds]


# ---------------------------------------------------------------------------
# decay fits
# ---------------------------------------------------------------------------


@dataclass
class DecayFit:
    """Bound ``C exp(-gamma n)`` on a worst-case trace.

    ``trace`` holds ``[n, value]`` pairs; values below the floor
    ``TRACE_FLOOR * value_0`` are round-off and excluded from the fit.
    """

    C: float
    gamma: float
    r2: float
    trace: list
    meta: dict = field(default_factory=dict)

    def bound(self, n) -> np.ndarray:
        return self.C * np.exp(-self.gamma * np.asarray(n, dtype=float))

    @property
    def passed(self) -> bool:
        return self.gamma > GAMMA_MIN

    def to_dict(self) -> dict:
        return asdict(self)

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "value", "bound"])
        for n, v in self.trace:
            w.writerow([n, repr(float(v)), repr(float(self.bound(n)))])
        return buf.getvalue()


def fit_decay(values, n_min: int = DECAY_FIT_START, floor: float = TRACE_FLOOR) -> DecayFit:
    """Least-squares fit of ``log v_n`` over ``n >= n_min``, then inflate ``C``."""
    v = np.asarray(values, dtype=float)
    n = np.arange(v.size)
    trace = [[int(i), float(x)] for i, x in zip(n, v)]
    scale = float(np.max(v)) if v.size else 0.0
    if scale <= 0:
        return DecayFit(0.0, 0.0, 1.0, trace, {"fit_points": 0})
    live = v > floor * max(v[0], scale)
    pts = live & (n >= n_min)
    if pts.sum() < 2:
        pts = live & (n >= 1)
    if pts.sum() < 2:
        pts = live
    if pts.sum() < 2:
        return DecayFit(scale, 0.0, 0.0, trace, {"fit_points": int(pts.sum())})
    slope, intercept = np.polyfit(n[pts], np.log(v[pts]), 1)
    pred = intercept + slope * n[pts]
    ss_res = float(np.sum((np.log(v[pts]) - pred) ** 2))
    ss_tot = float(np.sum((np.log(v[pts]) - np.log(v[pts]).mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    gamma = float(-slope)
    C = float(np.exp(intercept))
    C *= max(1.0, float(np.max(v[live] / (C * np.exp(-gamma * n[live])))))
    meta = {"fit_points": int(pts.sum()), "floor_hits": int((~live).sum())}
    return DecayFit(C, gamma, float(r2), trace, meta)


# ---------------------------------------------------------------------------
# local strong contraction
# ---------------------------------------------------------------------------


def _require_fixed(m: StoModel, h: CircleDensity, gate: float = FIXED_POINT_GATE) -> None:
    r = residual(m, h)
    if r > gate:
        raise NotFixedPointError(f"residual {r:.3g} exceeds the fixed-point gate {gate:.0e}")


def _losc_member(m, h, g, epsilon, n_steps):
    f = h + g * epsilon
    if minimum_value(f) < -POINTWISE_TOLERANCE:
        return None
    out = [analytic_norms(f - h).strong]
    for _ in range(n_steps):
        f = sto_apply(m, f)
        if minimum_value(f) < -POINTWISE_TOLERANCE:
            return None
        out.append(analytic_norms(f - h).strong)
    return out


def losc_experiment(m: StoModel, h: CircleDensity, epsilon: float = 1e-3, ensemble: int = 32,
                    n_steps: int = 12, rng=None, probes: bool = True,
                    threads: int | None = None) -> DecayFit:
    """Worst-case decay of ``||L^n(h + g) - h||_s / ||g||_s`` over random ``g``.

    Each ``g`` has ``||g||_{W^{1,1}} = epsilon``.  If any trajectory leaves
    the density cone, epsilon is divided by 10 once; members that still
    leave it are dropped and the fit is flagged.
    """
    h = h.resized(m.max_mode)
    _require_fixed(m, h)
    gs = random_zero_average(m.max_mode, ensemble, make_rng(rng), probes=probes)
    m.transfer
    meta = {"epsilon": epsilon, "members": len(gs), "shrunk": False, "flagged": False}
    if epsilon == 0:
        traces = [_losc_member(m, h, g, 0.0, n_steps) for g in gs[:1]]
        return fit_decay(np.max(np.array(traces), axis=0)) if traces else fit_decay([])
    runs = parallel_map(lambda g: _losc_member(m, h, g, epsilon, n_steps), gs, threads)
    if any(r is None for r in runs):
        epsilon /= 10.0
        meta.update(epsilon=epsilon, shrunk=True)
        runs = parallel_map(lambda g: _losc_member(m, h, g, epsilon, n_steps), gs, threads)
    good = [r for r in runs if r is not None]
    if len(good) < len(runs):
        meta["flagged"] = True
        meta["dropped"] = len(runs) - len(good)
    if not good:
        fit = DecayFit(float("inf"), 0.0, 0.0, [], meta)
        return fit
    worst = np.max(np.array(good) / epsilon, axis=0)
    fit = fit_decay(worst, floor=max(TRACE_FLOOR, NOISE_FLOOR / epsilon))
    fit.meta.update(meta)
    return fit


def rate_bracket(fit: DecayFit, report, slack: float = 0.1) -> dict:
    """Check ``gamma >= -(1/n) log(proxy_n) - slack`` at the first contracting ``n``."""
    n = report.first_contracting_n
    if n is None:
        return {"n": None, "linear_rate": None, "passed": False}
    p = report.proxy_norms[n - 1]
    lin = -np.log(p) / n if p > 0 else float("inf")
    return {"n": n, "linear_rate": float(lin) if np.isfinite(lin) else None,
            "passed": bool(fit.gamma >= lin - slack)}


def equilibrium_decay(m: StoModel, h: CircleDensity, n_steps: int = 20, ensemble: int = 32,
                      rng=None) -> list:
    """``a_n = max ||L_{delta,h}^n g||_w / ||g||_s`` over zero-average ``g``."""
    A = frozen_linear_matrix(m, h)
    B = A.zero_average_block()
    gs = random_zero_average(m.max_mode, ensemble, make_rng(rng), probes=True)
    N = m.max_mode
    X = np.array([np.delete(g.coeffs, N) for g in gs]).T
    s0 = np.array([analytic_norms(g).strong for g in gs])
    out = []
    for _ in range(n_steps):
        X = B @ X
        w = np.array([analytic_norms(CircleDensity(np.insert(x, N, 0.0))).weak for x in X.T])
        out.append(float(np.max(w / s0)))
    return out


# ---------------------------------------------------------------------------
# standing assumptions
# ---------------------------------------------------------------------------


@dataclass
class AuditReport:
    bound_C: float
    ly_lambda: float
    ly_A: float
    ly_B: float
    eq_decay: list
    lip_C0: float
    lip_C1: float
    flags: dict = field(default_factory=dict)
    half_sample: dict = field(default_factory=dict)

    @property
    def all_pass(self) -> bool:
        return all(self.flags.values())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["all_pass"] = self.all_pass
        return d


def _general_directions(N: int, count: int, rng) -> list:
    gs = random_zero_average(N, count, rng)
    masses = rng.uniform(-1.0, 1.0, size=count)
    return [g.with_mass(float(a)) for g, a in zip(gs, masses)]


def _lipschitz(m, pool, us, half):
    """Sampled constants of the two regularity estimates, full and half sample."""
    c0, c1 = [], []
    for i in range(len(pool) - 1):
        f1, f2 = pool[i], pool[i + 1]
        D = frozen_operator(m, f1) - frozen_operator(m, f2)
        dw = analytic_norms(f1 - f2).weak
        u = us[i]
        nu = analytic_norms(u)
        du = analytic_norms(D.apply(u))
        c0.append(du.strong / (nu.strongest * dw))
        c1.append(du.weak / (nu.strong * dw))
    scale = m.delta if m.delta > 0 else 1.0
    full = (max(c0) / scale, max(c1) / scale)
    part = (max(c0[:half]) / scale, max(c1[:half]) / scale)
    return full, part


def _sequential_ly(m, mats, gs, n_seq, rng):
    rows_n, rows_s, rows_s0, rows_w0, weak_ratio = [], [], [], [], []
    for g in gs:
        s0 = analytic_norms(g).strong
        w0 = analytic_norms(g).weak
        x = g
        for k in range(1, n_seq + 1):
            x = mats[int(rng.integers(len(mats)))].apply(x)
            nx = analytic_norms(x)
            rows_n.append(k)
            rows_s.append(nx.strong)
            rows_s0.append(s0)
            rows_w0.append(w0)
            weak_ratio.append(nx.weak / w0)
    fit = fit_ly_data(rows_n, rows_s, rows_s0, rows_w0)
    return fit, float(max(weak_ratio))


def assumption_audit(m: StoModel, samples: int = 32, rng=None, h: CircleDensity | None = None,
                     n_seq: int = 12, n_steps: int = 20) -> AuditReport:
    """Sample the boundedness, sequential Lasota-Yorke, equilibrium and Lipschitz constants.

    Constants are also computed on the first half of the sample; a constant
    that grows by more than ``DIVERGENCE_FACTOR`` between the two counts as
    diverging.  The audit never raises on numeric trouble; it flags.
    """
    rng = make_rng(rng)
    N = m.max_mode
    half = max(samples // 2, 1)
    pool = random_probability(N, samples + 1, rng, amplitude=0.5)
    flags = {}
    try:
        mats = [frozen_operator(m, f) for f in pool]
    except StoLabError as exc:
        log.warning("audit could not assemble operators: %s", exc)
        return AuditReport(float("inf"), 1.0, float("inf"), float("inf"), [], float("inf"),
                           float("inf"), {"assembly": False})

    norms = [max(A.weighted_norm(w, zero_average=False) for w in ("weak", "strong", "strongest"))
             for A in mats]
    bound_C, bound_half = max(norms), max(norms[:half])

    gs = _general_directions(N, samples, rng)
    ly, weak_bound = _sequential_ly(m, mats, gs, n_seq, rng)
    ly_B = max(ly.C5, weak_bound)
    ly_half, _ = _sequential_ly(m, mats, gs[:half], n_seq, rng)

    if h is None:
        rep = fixed_point(m, m.lebesgue(), tol=1e-12, max_iter=2000, solver="newton")
        h = rep.h
        flags["fixed_point"] = rep.converged
    eq = equilibrium_decay(m, h, n_steps, samples, rng)

    us = random_probability(N, samples, rng, amplitude=0.5, modes=8)
    (c0, c1), (c0h, c1h) = _lipschitz(m, pool, us, half)

    def steady(full, part):
        return bool(np.isfinite(full) and (part == 0 or full <= DIVERGENCE_FACTOR * part))

    flags.update({
        "boundedness": steady(bound_C, bound_half),
        "sequential_ly": bool(ly.success and ly.lambda_tilde < 1 and np.isfinite(ly.C4)
                              and steady(ly.C4, ly_half.C4) and steady(ly_B, ly_half.C5 or ly_B)),
        "equilibrium": bool(eq and np.all(np.isfinite(eq)) and eq[-1] < 1e-3),
        "lipschitz_C0": steady(c0, c0h),
        "lipschitz_C1": steady(c1, c1h),
    })
    halfs = {"bound_C": bound_half, "ly_A": ly_half.C4, "ly_lambda": ly_half.lambda_tilde,
             "lip_C0": c0h, "lip_C1": c1h}
    return AuditReport(bound_C, ly.lambda_tilde, ly.C4, ly_B, eq, c0, c1, flags, halfs)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


def _sweep_point(base: StoModel, delta: float, n: int, tol: float) -> dict:
    row = {"delta": float(delta)}
    try:
        m = base.with_delta(delta)
        rep = fixed_point(m, m.lebesgue(), tol=tol, max_iter=2000, solver="newton")
        row.update(converged=rep.converged, residual=rep.residual)
        if not rep.converged:
            row["flagged"] = True
            return row
        A = differential_matrix(m, rep.h, gate=max(FIXED_POINT_GATE, tol))
        dL = coupling_derivative_matrix(m, rep.h, gate=max(FIXED_POINT_GATE, tol))
        cr = contraction_report(A, n, ensemble=0)
        row.update(first_contracting_n=cr.first_contracting_n, proxy_norm=cr.proxy_norms[-1],
                   spectral_radius=cr.spectral_radius,
                   coupling_norm=dL.weighted_norm("strong"), flagged=False)
    except StoLabError as exc:
        row.update(converged=False, flagged=True, error=str(exc))
    return row


def weak_coupling_sweep(base: StoModel, deltas, n: int = 8, tol: float = 1e-10,
                        threads: int | None = None) -> dict:
    """Fixed point, differential and ``||dL^n||`` proxy for each coupling strength."""
    deltas = [float(d) for d in deltas]
    if deltas != sorted(deltas):
        raise ValueError("deltas must be sorted ascending")
    rows = parallel_map(lambda d: _sweep_point(base, d, n, tol), deltas, threads)
    delta_1 = None
    for r in rows:
        if r.get("flagged") or not r.get("proxy_norm", 2.0) < 1.0:
            break
        delta_1 = r["delta"]
    ok = delta_1 is not None and delta_1 > 0 and deltas[0] == 0.0
    return {"rows": rows, "n": n, "delta_1": delta_1, "contracting_interval": bool(ok)}


def psi_dot_norm(A: OperatorMatrix) -> float:
    """Weighted-l^1 norm of ``A`` from the weak to the strongest surrogate."""
    from .density import sobolev_weights

    w, _, ss = sobolev_weights(A.max_mode)
    return float(np.max((ss @ np.abs(A.entries)) / w))


def _strong_pair(T, sigma, delta, N, tol, n_max, epsilon, ensemble, seed):
    from .coupling import Stochastic

    rng = make_rng(seed)
    m = StoModel(T, Stochastic(sigma, delta), N)
    W_psi = float(np.exp(-4.0 * np.pi ** 2 * sigma ** 2))
    row = {"sigma": sigma, "delta": delta, "W_psi": W_psi, "switched": bool(delta * W_psi > 1.0)}
    start = wrapped_gaussian(0.1, sigma, N) + CircleDensity.from_modes(N, {2: 0.01})
    rep = fixed_point(m, start, tol=tol, max_iter=500)
    b = barycenter_stats(rep.h)
    psi_fixed = bool(rep.converged and not b.degenerate and delta * b.W > 1.0)
    row.update(psi_fixed=psi_fixed, psi_residual=rep.residual, found_W=b.W)
    if psi_fixed:
        A = differential_matrix(m, rep.h, gate=max(FIXED_POINT_GATE, tol))
        cr = contraction_report(A, n_max, ensemble=0)
        row.update(psi_dot_norm_w_ss=psi_dot_norm(coupling_derivative_matrix(m, rep.h)),
                   proxy_min=min(cr.proxy_norms), spectral_radius=cr.spectral_radius,
                   first_contracting_n=cr.first_contracting_n)
        fit = losc_experiment(m, rep.h, epsilon, ensemble, n_steps=12, rng=rng, probes=False)
        row["psi_gamma"] = fit.gamma
        row["admissible"] = bool(cr.first_contracting_n is not None and cr.spectral_radius < 1.0)
    else:
        row["admissible"] = False
    h0 = m.lebesgue()
    fit0 = losc_experiment(m, h0, epsilon, ensemble, n_steps=12, rng=rng)
    row.update(h0_gamma=fit0.gamma, h0_pass=fit0.passed)
    if row["admissible"]:
        row["admissible"] = bool(row["psi_gamma"] > GAMMA_MIN and fit0.passed)
    return row


def strong_regime_scan(T: ExpandingMapSpec, sigmas, deltas, max_mode: int = 32, tol: float = 1e-10,
                       n_max: int = 8, epsilon: float = 1e-3, ensemble: int = 8, rng=None,
                       threads: int | None = None) -> dict:
    """Search a ``(sigma, delta)`` grid for a stable Gaussian fixed point.

    A pair is admissible when a Gaussian fixed point with ``delta W > 1``
    exists, its differential contracts in the strong proxy, and both it and
    the uniform density show local strong contraction.
    """
    pairs = [(float(s), float(d)) for s in sigmas for d in deltas]
    seeds = make_rng(rng).integers(0, 2 ** 63 - 1, size=len(pairs))
    rows = parallel_map(lambda a: _strong_pair(T, a[0][0], a[0][1], max_mode, tol, n_max,
                                               epsilon, ensemble, int(a[1])),
                        list(zip(pairs, seeds)), threads)
    admissible = [[r["sigma"], r["delta"]] for r in rows if r["admissible"]]
    return {"rows": rows, "admissible_pairs": admissible, "any_admissible": bool(admissible),
            "h0_all_pass": all(r["h0_pass"] for r in rows)}


# ---------------------------------------------------------------------------
# perturbation families
# ---------------------------------------------------------------------------


def perturbed(m: StoModel, epsilon: float) -> StoModel:
    T = m.map
    return m.with_map(ExpandingMapSpec(T.degree, T.perturbation, float(epsilon)))


def fixed_density_closeness(m: StoModel, epsilons, tol: float = 1e-10) -> list:
    """``||h_eps - 1||_{W^{1,1}} / eps`` along the perturbation family of ``m``."""
    rows = []
    for eps in epsilons:
        t0 = time.perf_counter()
        me = perturbed(m, eps)
        rep = fixed_point(me, me.lebesgue(), tol=tol, max_iter=2000, solver="newton")
        dist = analytic_norms(rep.h - me.lebesgue()).strong
        rows.append({"epsilon": float(eps), "distance": dist, "ratio": dist / eps,
                     "residual": rep.residual, "converged": rep.converged,
                     "seconds": time.perf_counter() - t0})
    return rows


def weak_closeness(m: StoModel, epsilons, samples: int = 64, rng=None, tol: float = 1e-12) -> list:
    """Sampled ``sup ||(dL_eps - dL_0) eta||_{L^1} / eps`` over unit-W^{1,1} ``eta``."""
    m0 = perturbed(m, 0.0)
    h0 = fixed_point(m0, m0.lebesgue(), tol=tol, solver="newton").h
    D0 = differential_matrix(m0, h0)
    etas = random_zero_average(m.max_mode, samples, make_rng(rng), probes=True)
    rows = []
    for eps in epsilons:
        me = perturbed(m, eps)
        h = fixed_point(me, me.lebesgue(), tol=tol, max_iter=2000, solver="newton").h
        D = differential_matrix(me, h) - D0
        sup = max(analytic_norms(D.apply(e)).weak for e in etas)
        rows.append({"epsilon": float(eps), "sup": sup, "C3": sup / eps})
    return rows


# ---------------------------------------------------------------------------
# sequential loss of memory
# ---------------------------------------------------------------------------


def _closeness(m, L0, fs, probes):
    worst = 0.0
    for f in fs:
        D = frozen_operator(m, f) - L0
        for g in probes:
            worst = max(worst, analytic_norms(D.apply(g)).weak / analytic_norms(g).strong)
    return worst


def _sequence_pool(m, h, L0, epsilon, count, rng, probes):
    """Densities near ``h`` whose frozen operators are ``epsilon``-close to ``L0``."""
    N = m.max_mode
    us = [sup_normalized(u) for u in random_zero_average(N, count, rng, max_active=4)]
    rho_max = 0.5 * max(minimum_value(h), 0.0)
    trial = min(0.1, rho_max)
    c = _closeness(m, L0, [h + u * trial for u in us], probes) if trial > 0 else 0.0
    rho = rho_max if c == 0 else min(rho_max, 0.9 * epsilon * trial / c)
    meta = {"rho": rho, "shrunk": False, "flagged": False}
    for attempt in range(2):
        fs = [h + u * rho for u in us]
        c = _closeness(m, L0, fs, probes)
        if c <= epsilon:
            break
        if attempt == 0:
            rho *= 0.5
            meta.update(rho=rho, shrunk=True)
        else:
            meta["flagged"] = True
    meta["closeness"] = c
    return fs, meta


def memory_loss_experiment(m: StoModel, h: CircleDensity, epsilon: float = 0.05, n_steps: int = 20,
                           ensemble: int = 32, rng=None, audit: AuditReport | None = None,
                           pool: int = 16) -> tuple:
    """Sequential compositions of frozen operators near ``L_{delta,h}``.

    Returns the decay fit of ``||L^{(1,n)} g||_s / ||g||_s`` and a table of
    ``||L^{(1,n)} g - L_0^n g||_w`` against
    ``M^n eps (C ||g||_s + n B / (1 - lam) ||g||_w)`` with
    ``C = 1 + A / (1 - lam)`` and the audited ``(lam, A, B)``.
    """
    rng = make_rng(rng)
    h = h.resized(m.max_mode)
    _require_fixed(m, h)
    if audit is None:
        audit = assumption_audit(m, rng=rng, h=h)
    L0 = frozen_linear_matrix(m, h)
    check = random_zero_average(m.max_mode, 16, rng, probes=True)
    fs, meta = _sequence_pool(m, h, L0, epsilon, pool, rng, check)
    mats = [frozen_operator(m, f) for f in fs]

    gs = random_zero_average(m.max_mode, ensemble, rng, probes=True)
    lam, A, B = audit.ly_lambda, audit.ly_A, audit.ly_B
    eps_seq = meta["closeness"]
    M_weak = 1.0
    strong = np.zeros((len(gs), n_steps + 1))
    dist = np.zeros((len(gs), n_steps + 1))
    bounds = np.zeros((len(gs), n_steps + 1))
    C = 1.0 + A / (1.0 - lam)
    for i, g in enumerate(gs):
        ng = analytic_norms(g)
        x, y = g, g
        strong[i, 0] = 1.0
        for k in range(1, n_steps + 1):
            x = mats[int(rng.integers(len(mats)))].apply(x)
            y = L0.apply(y)
            M_weak = max(M_weak, analytic_norms(x).weak / ng.weak)
            strong[i, k] = analytic_norms(x).strong / ng.strong
            dist[i, k] = analytic_norms(x - y).weak
            bounds[i, k] = eps_seq * (C * ng.strong + k * B / (1.0 - lam) * ng.weak)
    fit = fit_decay(np.max(strong, axis=0))
    fit.meta.update(meta)
    table = []
    for k in range(1, n_steps + 1):
        bound_k = (M_weak ** k) * bounds[:, k]
        ratio = np.where(bound_k > 0, dist[:, k] / np.where(bound_k > 0, bound_k, 1.0),
                         np.where(dist[:, k] > 0, np.inf, 0.0))
        table.append({"n": k, "distance": float(np.max(dist[:, k])),
                      "bound": float(np.min(bound_k)), "ratio": float(np.max(ratio))})
    fit.meta.update(M=M_weak, epsilon_sequence=eps_seq, C=C)
    return fit, table


# ---------------------------------------------------------------------------
# finite-particle cross-check
# ---------------------------------------------------------------------------


def sample_density(f: CircleDensity, count: int, rng) -> np.ndarray:
    """Draw points from a probability density by inverse-CDF interpolation."""
    M = max(quadrature_points(f.max_mode), 8192)
    values = np.maximum(evaluate(f, M), 0.0)
    cdf = np.concatenate([[0.0], np.cumsum(values)])
    cdf /= cdf[-1]
    grid = np.arange(M + 1) / M
    return np.interp(make_rng(rng).uniform(size=count), cdf, grid)


def _particle_step(m: StoModel, x: np.ndarray) -> np.ndarray:
    c = m.coupling
    if isinstance(c, Translation):
        shift = c.delta * float(np.mean(_kernels.trig_eval(c.H.coeffs, x)))
        y = x + shift
    elif isinstance(c, GeneralKernel):
        K = c.max_mode
        mom = _kernels.empirical_moments(x, K)
        mu = np.concatenate([mom[:0:-1], np.conj(mom)])  # mean exp(2 pi i b x), b = -K..K
        disp = c.delta * (c.H @ mu)
        y = x + _kernels.trig_eval(disp, x)
    else:
        raise TypeError("particle cross-check needs a deterministic coupling")
    return np.mod(map_eval(m.map, np.mod(y, 1.0)), 1.0)


def kde_density(x: np.ndarray, bandwidth: float) -> CircleDensity:
    """Wrapped-Gaussian kernel estimate; modes beyond where the kernel drops below 1e-16 are cut."""
    K = max(1, int(np.ceil(np.sqrt(np.log(1e16) / (2.0 * np.pi ** 2)) / bandwidth)))
    mom = _kernels.empirical_moments(x, K)
    n = np.arange(K + 1)
    half = mom * np.exp(-2.0 * np.pi ** 2 * bandwidth ** 2 * n ** 2)
    return CircleDensity(np.concatenate([np.conj(half[:0:-1]), half]))


def ensemble_crosscheck(m: StoModel, particles: int, steps: int, seed, f0: CircleDensity | None = None,
                        target: CircleDensity | None = None) -> dict:
    """Simulate the finite particle system and compare with the fixed density in L^1."""
    rng = make_rng(seed)
    if f0 is None:
        f0 = CircleDensity.from_modes(m.max_mode, {0: 1.0, 1: 0.25})
    if target is None:
        target = fixed_point(m, f0, tol=1e-10, max_iter=2000).h
    bandwidth = 4.0 / np.sqrt(particles)
    x = sample_density(f0, particles, rng)
    for _ in range(steps):
        x = _particle_step(m, x)
    est = kde_density(x, bandwidth)
    K = max(est.max_mode, target.max_mode)
    dist = l1_norm(est.resized(K) - target.resized(K))
    return {"particles": int(particles), "steps": int(steps), "bandwidth": float(bandwidth),
            "distance": float(dist)}


def crosscheck_scaling(m: StoModel, counts=(1000, 10000, 100000), steps: int = 20, seeds: int = 5,
                       seed=0, threads: int | None = None) -> dict:
    """Mean and standard error of the L^1 distance per particle count over independent seeds."""
    f0 = CircleDensity.from_modes(m.max_mode, {0: 1.0, 1: 0.25})
    target = fixed_point(m, f0, tol=1e-10, max_iter=2000).h
    base = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    child = base.spawn(seeds)
    jobs = [(P, s) for P in counts for s in child]
    out = parallel_map(lambda j: ensemble_crosscheck(m, j[0], steps, j[1], f0, target)["distance"],
                       jobs, threads)
    rows = []
    for i, P in enumerate(counts):
        d = np.array(out[i * seeds:(i + 1) * seeds])
        se = float(d.std(ddof=1) / np.sqrt(seeds)) if seeds > 1 else 0.0
        rows.append({"particles": int(P), "mean": float(d.mean()), "se": se,
                     "distances": d.tolist()})
    monotone = all(b["mean"] <= a["mean"] + 2.0 * np.hypot(a["se"], b["se"])
                   for a, b in zip(rows, rows[1:]))
    return {"rows": rows, "monotone": bool(monotone)}


# ---------------------------------------------------------------------------
# multi-start
# ---------------------------------------------------------------------------


def multistart(m: StoModel, starts: int = 8, tol: float = 1e-10, rng=None, solver: str = "picard",
               threads: int | None = None) -> dict:
    """Fixed points from random initial densities and their largest pairwise distance."""
    f0s = random_probability(m.max_mode, starts, make_rng(rng), amplitude=0.8, modes=3)
    m.transfer
    reps = parallel_map(lambda f: fixed_point(m, f, tol=tol, max_iter=2000, solver=solver),
                        f0s, threads)
    hs = [r.h for r in reps]
    gap = max((analytic_norms(a - b).strong for i, a in enumerate(hs) for b in hs[i + 1:]),
              default=0.0)
    Ws = [barycenter_stats(h).W for h in hs]
    converged = all(r.converged for r in reps)
    return {"starts": starts, "converged": converged, "max_disagreement": gap,
            "unique_fixed_point": bool(converged and gap <= 10 * tol),
            "W": Ws, "residuals": [r.residual for r in reps],
            "initial_W": [barycenter_stats(f).W for f in f0s]}
