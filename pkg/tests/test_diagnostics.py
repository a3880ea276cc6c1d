import numpy as np
import pytest

from conftest import stochastic_model, translation_model
from sto_lab import diagnostics as dg
from sto_lab.coupling import wrapped_gaussian
from sto_lab.density import trig_polynomial
from sto_lab.differential import contraction_report, differential_matrix
from sto_lab.exceptions import NotFixedPointError


def test_fit_decay_recovers_rate():
    v = 3.0 * np.exp(-0.7 * np.arange(15))
    fit = dg.fit_decay(v)
    assert fit.gamma == pytest.approx(0.7, rel=1e-9)
    assert np.all(fit.bound(np.arange(15)) >= v * (1 - 1e-12))
    assert fit.trace_csv().startswith("n,value,bound")


def test_fit_decay_excludes_floor():
    v = np.maximum(np.exp(-np.log(2) * np.arange(60)), 1e-15)
    assert dg.fit_decay(v).gamma == pytest.approx(np.log(2), rel=0.01)


def test_losc_linear_rate(linear_model):
    fit = dg.losc_experiment(linear_model, linear_model.lebesgue(), ensemble=8, rng=0)
    assert fit.gamma == pytest.approx(np.log(2), rel=0.1) and fit.passed


def test_losc_zero_epsilon(linear_model):
    fit = dg.losc_experiment(linear_model, linear_model.lebesgue(), epsilon=0.0, ensemble=4, rng=0)
    assert all(v <= 1e-12 for _, v in fit.trace)


def test_losc_requires_fixed_point(linear_model):
    with pytest.raises(NotFixedPointError):
        dg.losc_experiment(linear_model, trig_polynomial(32, 1.0, cos={1: 0.3}), ensemble=2)


def test_losc_rate_bracket(perturbed_model, perturbed_fixed):
    fit = dg.losc_experiment(perturbed_model, perturbed_fixed, ensemble=8, rng=0)
    rep = contraction_report(differential_matrix(perturbed_model, perturbed_fixed), 8, ensemble=0)
    assert fit.passed and dg.rate_bracket(fit, rep)["passed"]


def test_equilibrium_decay_linear(linear_model):
    a = np.array(dg.equilibrium_decay(linear_model, linear_model.lebesgue(), n_steps=10, rng=0))
    assert np.all(a <= a[0] * 2.0 ** -np.arange(10) * 1.5 + 1e-15)
    assert np.all(np.diff(a) <= 1e-8)


def test_equilibrium_decay_strong_psi():
    m = stochastic_model(32, 5.0, 0.1)
    a = dg.equilibrium_decay(m, wrapped_gaussian(0.1, 0.1, 32), n_steps=3, rng=0)
    assert a[0] == 0.0


def test_audit_linear(linear_model):
    rep = dg.assumption_audit(linear_model, samples=16, rng=0)
    assert rep.all_pass
    assert rep.ly_lambda == pytest.approx(0.5, abs=0.3)


def test_audit_uncoupled_has_no_lipschitz_dependence():
    rep = dg.assumption_audit(translation_model(16, 0.0, 0.05), samples=8, rng=0)
    assert rep.lip_C0 <= 1e-12 and rep.lip_C1 <= 1e-12


def test_audit_stochastic_lipschitz_scales_linearly():
    c0 = [dg.assumption_audit(stochastic_model(16, d), samples=16, rng=3).lip_C0
          for d in (0.025, 0.05, 0.1)]
    assert max(c0) / min(c0) < 1.5


def test_weak_sweep_linear():
    sw = dg.weak_coupling_sweep(translation_model(16), [0.0, 0.5, 1.0, 4.0], n=4)
    assert sw["contracting_interval"] and sw["delta_1"] == 4.0
    assert all(r["proxy_norm"] < 1 for r in sw["rows"])


def test_weak_sweep_stochastic_coupling_norm_grows():
    h = [r["coupling_norm"] for r in
         dg.weak_coupling_sweep(stochastic_model(16), [0.0, 0.02, 0.05], n=4)["rows"]]
    assert h == sorted(h)


def test_memory_with_frozen_sequence(linear_model):
    fit, table = dg.memory_loss_experiment(linear_model, linear_model.lebesgue(), epsilon=0.0,
                                           n_steps=5, ensemble=4, rng=0)
    assert all(r["distance"] == 0.0 for r in table)


def test_memory_linear(linear_model):
    fit, table = dg.memory_loss_experiment(linear_model, linear_model.lebesgue(), n_steps=12,
                                           ensemble=8, rng=0)
    assert fit.gamma == pytest.approx(np.log(2), rel=0.25)
    assert max(r["ratio"] for r in table) <= 1.0


def test_kde_and_sampling_recover_density():
    f = trig_polynomial(8, 1.0, cos={1: 0.5})
    x = dg.sample_density(f, 200_000, 0)
    est = dg.kde_density(x, 0.01)
    assert abs(est.coefficient(1) - 0.25) < 0.01


def test_ensemble_translation_matches_uncoupled():
    a = dg.ensemble_crosscheck(translation_model(16, 0.0), 20_000, 10, 1)["distance"]
    b = dg.ensemble_crosscheck(translation_model(16, 1.0), 20_000, 10, 1)["distance"]
    assert a < 0.1 and b < 0.1 and abs(a - b) < 0.05


def test_multistart_unique(rng):
    out = dg.multistart(stochastic_model(16), starts=4, rng=rng)
    assert out["unique_fixed_point"] and max(out["W"]) < 1e-6


def test_parallel_map_keeps_order(monkeypatch):
    monkeypatch.setenv(dg.THREADS_ENV, "3")
    assert dg.resolve_threads() == 3
    assert dg.resolve_threads(2) == 2
    assert dg.parallel_map(lambda v: v * v, range(10)) == [v * v for v in range(10)]


def test_threaded_losc_is_deterministic(linear_model):
    a = dg.losc_experiment(linear_model, linear_model.lebesgue(), ensemble=6, rng=4, threads=1)
    b = dg.losc_experiment(linear_model, linear_model.lebesgue(), ensemble=6, rng=4, threads=3)
    assert a.trace == b.trace and a.gamma == b.gamma


def test_closeness_families():
    m = translation_model(32, epsilon=0.05, mode=2, amplitude=0.5)
    rows = dg.fixed_density_closeness(m, [0.02, 0.05])
    r = [row["ratio"] for row in rows]
    assert all(row["converged"] for row in rows) and max(r) < 2 * min(r)


def test_closeness_first_order_vanishes_for_sin_2pi():
    """For p = sin(2 pi x) the linear response of h_eps cancels between branches."""
    m = translation_model(32, epsilon=0.05)
    rows = dg.fixed_density_closeness(m, [0.02, 0.04])
    assert rows[1]["distance"] / rows[0]["distance"] == pytest.approx(4.0, rel=0.1)
