"""Command-line runner for configured experiments.

Exit status: 0 when every pass/fail flag passes, 1 on a failed flag or a
numerical failure (the partial summary is still written), 2 on usage and
schema errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from . import differential as df
from .config import ConfigError, build_model, load_config, shipped_configs, trig_from_config
from .coupling import Stochastic, Translation, barycenter_stats
from .density import CircleDensity
from .exceptions import StoLabError
from .sto import fixed_point

LEAK_TOL = 1e-10
RANK_ONE_TOL = 1e-10
STABILITY_FACTOR = 2.0


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def sanitize(obj):
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats become ``None``."""
    if isinstance(obj, dict):
        return {str(k): sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return sanitize(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def rows_csv(rows: list) -> str:
    if not rows:
        return ""
    keys = []
    for r in rows:
        keys += [k for k in r if k not in keys and not isinstance(r[k], (list, dict))]
    buf = io.StringIO()
    w = csv.DictWriter(buf, keys, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items() if k in keys})
    return buf.getvalue()


class Run:
    """Accumulates results, flags and trace files for one experiment."""

    def __init__(self, cfg: dict, threads):
        self.cfg = cfg
        self.exp = cfg["experiment"]
        self.threads = threads
        self.seeds = np.random.SeedSequence(cfg.get("seed", 0))
        self.results: dict = {}
        self.flags: dict = {}
        self.traces: dict = {}

    def rng(self):
        return np.random.default_rng(self.seeds.spawn(1)[0])

    def param(self, key, default):
        return self.exp.get(key, default)

    def flag(self, name: str, value) -> None:
        self.flags[name] = bool(value)


def _solve(m, tol, f0=None, solver="newton", max_iter=2000):
    rep = fixed_point(m, f0 if f0 is not None else m.lebesgue(), tol=tol, max_iter=max_iter,
                      solver=solver)
    return rep


def _fixed(run: Run, m, tol, prefix="") -> CircleDensity:
    rep = _solve(m, tol)
    run.results[prefix + "fixed_point"] = {"residual": rep.residual, "iterations": rep.iterations,
                                           "solver": rep.solver, "converged": rep.converged}
    run.traces[prefix + "fixed_point_history.csv"] = rep.history_csv()
    run.flag(prefix + "fixed_point_converged", rep.converged)
    if not rep.converged:
        raise StoLabError(f"fixed point did not converge (residual {rep.residual:.3g})")
    return rep.h


def _gamma_flags(run: Run, fit, prefix=""):
    run.flag(prefix + "gamma_positive", fit.passed)
    target = run.exp.get("expect_gamma")
    if target is not None:
        rel = run.exp.get("gamma_rel_tol", 0.1)
        run.flag(prefix + "gamma_expected", abs(fit.gamma - target) <= rel * target)


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def exp_fixed_point(run: Run, m) -> None:
    tol = run.param("tol", 1e-10)
    f0 = trig_from_config({"const": 1.0, **run.param("f0", {})}, m.max_mode) \
        if "f0" in run.exp else None
    rep = _solve(m, tol, f0, run.param("solver", "newton"), run.param("max_iter", 2000))
    b = barycenter_stats(rep.h)
    run.results["fixed_point"] = {"residual": rep.residual, "iterations": rep.iterations,
                                  "solver": rep.solver, "converged": rep.converged, "W": b.W,
                                  "h": rep.h.to_dict()}
    run.traces["fixed_point_history.csv"] = rep.history_csv()
    run.flag("converged", rep.converged)
    starts = run.exp.get("multistart")
    if starts:
        ms = dg.multistart(m, starts, tol, run.rng(), run.param("solver", "newton"), run.threads)
        run.results["multistart"] = ms
        run.results["unique_fixed_point"] = ms["unique_fixed_point"]
        run.flag("unique_fixed_point", ms["unique_fixed_point"])
        Ws = ms["W"]
    else:
        Ws = [b.W]
    if "max_W" in run.exp:
        run.flag("W_below_max", max(Ws) < run.exp["max_W"])


def _rank_one_defect(M) -> float:
    s = np.linalg.svd(M.entries, compute_uv=False)
    return float(s[1] / s[0]) if s[0] > 0 else 0.0


def exp_differential(run: Run, m) -> None:
    tol = run.param("tol", 1e-12)
    h = _fixed(run, m, tol)
    frozen = df.frozen_linear_matrix(m, h)
    dL = df.coupling_derivative_matrix(m, h)
    A = frozen + dL
    decomposition = float(np.max(np.abs(A.entries - df.differential_matrix(m, h).entries)))
    leak = df.zero_average_leak(A)
    coupling_max = float(np.max(np.abs(dL.entries)))
    run.results["assembly"] = {"decomposition_defect": decomposition, "zero_average_leak": leak,
                               "coupling_term_max": coupling_max,
                               "coupling_term_strong_norm": dL.weighted_norm("strong")}
    run.flag("decomposition", decomposition <= LEAK_TOL)
    run.flag("zero_average_leak", leak <= LEAK_TOL)
    if isinstance(m.coupling, Translation):
        if m.map.epsilon == 0:
            run.flag("coupling_term_zero", coupling_max <= LEAK_TOL)
        elif coupling_max > LEAK_TOL:
            defect = _rank_one_defect(dL)
            run.results["assembly"]["rank_one_defect"] = defect
            run.flag("coupling_term_rank_one", defect <= RANK_ONE_TOL)

    g = trig_from_config(run.param("direction", {"cos": {"2": 0.1}}), m.max_mode)
    fd = df.fd_validate_differential(m, h, g, tuple(run.param("fd_steps", [1e-2, 1e-3, 1e-4])), A)
    run.results["fd"] = fd.to_dict()
    run.traces["fd.csv"] = rows_csv([{"t": t, "error": e} for t, e in zip(fd.steps, fd.errors)])
    run.flag("fd_passed", fd.passed)

    n_max = run.param("n_max", 8)
    cr = df.contraction_report(A, n_max, run.param("ensemble", 64), run.rng())
    run.results["contraction"] = cr.to_dict()
    run.traces["contraction.csv"] = cr.table_csv()
    run.flag("contraction_found", cr.first_contracting_n is not None)

    ly = df.ly_fit(A, run.param("ly_n_max", 20), run.param("ensemble", 64), run.rng())
    run.results["ly_fit"] = ly.to_dict()
    run.flag("ly_success", ly.success and ly.lambda_tilde < 1 and math.isfinite(ly.C4)
             and math.isfinite(ly.C5))
    run.flag("ly_validated", bool(ly.validated))

    eps = run.exp.get("epsilons")
    if eps:
        rows = dg.fixed_density_closeness(m, eps, tol=min(tol, 1e-10))
        for r in rows:
            r.pop("seconds", None)
        ratios = [r["ratio"] for r in rows]
        run.results["closeness"] = {"rows": rows, "ratio_spread": max(ratios) / min(ratios)}
        run.traces["closeness.csv"] = rows_csv(rows)
        run.flag("closeness_converged", all(r["converged"] for r in rows))
        run.flag("closeness_stable", max(ratios) < STABILITY_FACTOR * min(ratios))
        wk = dg.weak_closeness(m, eps, rng=run.rng())
        c3 = [r["C3"] for r in wk]
        run.results["weak_closeness"] = {"rows": wk, "C3_spread": max(c3) / min(c3)}
        run.traces["weak_closeness.csv"] = rows_csv(wk)
        run.flag("C3_stable", max(c3) < STABILITY_FACTOR * min(c3))


def exp_losc(run: Run, m) -> None:
    tol = run.param("tol", 1e-12)
    deltas = run.exp.get("deltas", [m.delta])
    out = []
    for d in deltas:
        md = m.with_delta(d)
        tag = f"delta={d:g}/"
        h = _fixed(run, md, tol, prefix=tag)
        fit = dg.losc_experiment(md, h, run.param("epsilon", 1e-3), run.param("ensemble", 32),
                                 run.param("n_steps", 12), run.rng(), threads=run.threads)
        A = df.differential_matrix(md, h)
        cr = df.contraction_report(A, run.param("n_max", 8), ensemble=0)
        br = dg.rate_bracket(fit, cr)
        out.append({"delta": d, "gamma": fit.gamma, "C": fit.C, "r2": fit.r2,
                    "meta": fit.meta, "rate_bracket": br,
                    "proxy_norms": cr.proxy_norms, "spectral_radius": cr.spectral_radius})
        run.traces[f"losc_delta_{d:g}.csv"] = fit.trace_csv()
        _gamma_flags(run, fit, tag)
        run.flag(tag + "rate_bracket", br["passed"])
    run.results["losc"] = out
    run.results["gamma"] = [r["gamma"] for r in out] if len(out) > 1 else out[0]["gamma"]


def exp_sweep(run: Run, m) -> None:
    if run.param("mode", "weak") == "weak":
        deltas = run.param("deltas", [0.0, 0.05, 0.1, 0.2, 0.5, 1.0])
        sw = dg.weak_coupling_sweep(m, deltas, run.param("n", 8), run.param("tol", 1e-10),
                                    run.threads)
        run.results["sweep"] = sw
        run.traces["sweep.csv"] = rows_csv(sw["rows"])
        run.flag("contracting_interval", sw["contracting_interval"])
        return
    if not isinstance(m.coupling, Stochastic):
        raise ConfigError("the strong-regime sweep needs a stochastic coupling")
    scan = dg.strong_regime_scan(m.map, run.param("sigmas", [0.05, 0.1, 0.2]),
                                 run.param("deltas", [1.0, 5.0, 50.0]), m.max_mode,
                                 run.param("tol", 1e-10), epsilon=run.param("epsilon", 1e-3),
                                 ensemble=run.param("ensemble", 8), rng=run.rng(),
                                 threads=run.threads)
    run.results["strong_scan"] = scan
    run.traces["strong_scan.csv"] = rows_csv(scan["rows"])
    run.flag("h0_all_pass", scan["h0_all_pass"])
    run.flag("any_admissible", scan["any_admissible"])


def exp_memory(run: Run, m) -> None:
    h = _fixed(run, m, run.param("tol", 1e-12))
    rng = run.rng()
    audit = dg.assumption_audit(m, run.param("samples", 32), rng, h=h)
    fit, table = dg.memory_loss_experiment(m, h, run.param("epsilon", 0.05),
                                           run.param("n_steps", 20), run.param("ensemble", 32),
                                           rng, audit)
    worst = max(r["ratio"] for r in table)
    run.results["audit"] = audit.to_dict()
    run.results["memory"] = {"gamma": fit.gamma, "C": fit.C, "r2": fit.r2, "meta": fit.meta,
                             "max_bound_ratio": worst, "table": table}
    run.results["gamma"] = fit.gamma
    run.traces["memory_decay.csv"] = fit.trace_csv()
    run.traces["memory_bound.csv"] = rows_csv(table)
    _gamma_flags(run, fit)
    run.flag("bound_ratio", worst <= 1.0)


def exp_audit(run: Run, m) -> None:
    deltas = run.exp.get("deltas", [m.delta])
    reports = []
    for d in deltas:
        rep = dg.assumption_audit(m.with_delta(d), run.param("samples", 32), run.rng())
        reports.append({"delta": d, **rep.to_dict()})
        for k, v in rep.flags.items():
            run.flag(f"delta={d:g}/{k}", v)
    run.results["audit"] = reports if len(reports) > 1 else reports[0]
    run.traces["audit.csv"] = rows_csv(reports)
    if len(deltas) > 1 and min(deltas) > 0:
        for key in ("lip_C0", "lip_C1"):
            vals = [r[key] for r in reports]
            spread = max(vals) / min(vals) if min(vals) > 0 else float("inf")
            run.results[key + "_spread"] = spread
            run.flag(key + "_scaling", spread < STABILITY_FACTOR)


def exp_ensemble(run: Run, m) -> None:
    counts = run.param("particles", [1000, 10000, 100000])
    sc = dg.crosscheck_scaling(m, counts, run.param("steps", 20), run.param("seeds", 5),
                               run.seeds.spawn(1)[0], run.threads)
    run.results["ensemble"] = sc
    run.traces["ensemble.csv"] = rows_csv(sc["rows"])
    largest = max(sc["rows"][-1]["distances"])
    run.results["max_distance_at_largest"] = largest
    run.flag("monotone", sc["monotone"])
    run.flag("max_distance", largest <= run.param("max_distance", 0.05))


EXPERIMENTS = {
    "fixed-point": exp_fixed_point,
    "differential": exp_differential,
    "losc": exp_losc,
    "sweep": exp_sweep,
    "memory": exp_memory,
    "audit": exp_audit,
    "ensemble": exp_ensemble,
}


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


def resolve_config(path: str) -> Path:
    """Use ``path`` if it exists, else a shipped config with that name."""
    p = Path(path)
    if p.exists():
        return p
    shipped = shipped_configs()
    for name in (p.name, p.name + ".json"):
        if name in shipped:
            return shipped[name]
    return p


def run_experiment(config_path, threads=None, out=None, quiet=False) -> int:
    cfg = load_config(resolve_config(str(config_path)))
    m = build_model(cfg)
    run = Run(cfg, threads)
    error = None
    try:
        EXPERIMENTS[cfg["experiment"]["type"]](run, m)
    except ConfigError:
        raise
    except StoLabError as exc:
        error = f"{type(exc).__name__}: {exc}"
    ok = error is None and bool(run.flags) and all(run.flags.values())
    summary = {
        "id": cfg["id"],
        "experiment": cfg["experiment"]["type"],
        "config": cfg,
        "model": {**m.to_dict(), "sigma_prime": m.sigma_prime, "c3_bound": m.c3_bound},
        "results": run.results,
        "flags": run.flags,
        "error": error,
        "passed": ok,
    }
    root = Path(out if out is not None else cfg.get("output_dir", "out")) / cfg["id"]
    root.mkdir(parents=True, exist_ok=True)
    (root / "summary.json").write_text(
        json.dumps(sanitize(summary), sort_keys=True, indent=2, allow_nan=False) + "\n")
    for name, text in run.traces.items():
        (root / name.replace("/", "_")).write_text(text)
    if not quiet:
        _print_summary(summary, root)
    return 0 if ok else 1


def _headline(results: dict) -> list:
    keys = ("gamma", "unique_fixed_point", "max_distance_at_largest")
    lines = [f"  {k}: {results[k]}" for k in keys if k in results]
    if "contraction" in results:
        c = results["contraction"]
        lines.append(f"  first contracting n: {c['first_contracting_n']}, "
                     f"spectral radius {c['spectral_radius']:.4g}")
    if "ly_fit" in results:
        ly = results["ly_fit"]
        lines.append(f"  LY: lambda={ly['lambda_tilde']:.3g} C4={ly['C4']:.3g} C5={ly['C5']:.3g}")
    if "memory" in results:
        lines.append(f"  max bound ratio: {results['memory']['max_bound_ratio']:.3g}")
    return lines


def _print_summary(summary: dict, root: Path) -> None:
    print(f"{summary['id']} [{summary['experiment']}]  sigma'={summary['model']['sigma_prime']:.4g}")
    for line in _headline(summary["results"]):
        print(line)
    for name, v in summary["flags"].items():
        print(f"  {'PASS' if v else 'FAIL'}  {name}")
    if summary["error"]:
        print(f"  error: {summary['error']}")
    print(f"{'PASSED' if summary['passed'] else 'FAILED'}  -> {root / 'summary.json'}")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sto-lab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--threads", type=int, default=None,
                   help="worker cap (default: $STO_LAB_THREADS or 1)")
    r.add_argument("--out", default=None, help="output root (default: config output_dir or ./out)")
    v = sub.add_parser("validate", help="check a config against the schema")
    v.add_argument("config")
    sub.add_parser("list-examples", help="list the shipped configs")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "list-examples":
            for name, path in shipped_configs().items():
                desc = json.loads(path.read_text()).get("description", "")
                print(f"{name:40s} {desc}")
            return 0
        if args.command == "validate":
            cfg = load_config(resolve_config(args.config))
            build_model(cfg)
            print(f"{cfg['id']}: ok")
            return 0
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be a positive integer")
        return run_experiment(args.config, args.threads, args.out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (StoLabError, ValueError) as exc:
        # invalid model parameters (non-expanding map, kernel too strong)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
