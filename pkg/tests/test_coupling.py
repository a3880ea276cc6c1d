import numpy as np
import pytest

from conftest import cos_density, standard_H
from sto_lab.coupling import (
    GeneralKernel,
    Sampled,
    Shift,
    Stochastic,
    Translation,
    barycenter_stats,
    coupling_from_dict,
    kernel_pairing,
    mean_field_map,
    psi_dot_matrix,
    psi_of,
    pushforward,
    wrapped_gaussian,
)
from sto_lab.density import CircleDensity, analytic_norms, evaluate, is_probability, trig_polynomial
from sto_lab.ensembles import random_probability
from sto_lab.exceptions import DegenerateBarycenterError, NotDiffeomorphismError


def quad_pairing(H, f, M=1024):
    """Oracle: rectangle-rule integral of H f."""
    return float(np.mean(evaluate(H, M) * evaluate(f, M)))


def test_translation_shift_values():
    H = trig_polynomial(1, cos={1: 1.0})
    c = Translation(H, 0.5)
    assert mean_field_map(c, CircleDensity.constant(1.0, 4)).a == pytest.approx(0.0)
    f = trig_polynomial(4, 1.0, cos={1: 1.0})
    assert mean_field_map(c, f).a == pytest.approx(0.5 * quad_pairing(H, f))
    assert mean_field_map(c, f).a == pytest.approx(0.25)


def test_kernel_pairing_matches_quadrature(rng):
    H = standard_H()
    for _ in range(10):
        f = random_probability(12, 1, rng)[0]
        assert kernel_pairing(H, f) == pytest.approx(quad_pairing(H, f), abs=1e-12)


def test_general_kernel_identity_on_lebesgue():
    c = GeneralKernel.sine_difference(1.0, 0.05)
    d = mean_field_map(c, CircleDensity.constant(1.0, 8))
    assert np.allclose(d.values, d.x, atol=1e-14)


def test_general_kernel_diffeomorphism_guard():
    assert GeneralKernel.sine_difference(1.0).d1_sup == pytest.approx(2 * np.pi)
    with pytest.raises(NotDiffeomorphismError):
        GeneralKernel.sine_difference(1.0, 0.2)


def test_general_kernel_derivative_bounds(rng):
    c = GeneralKernel.sine_difference(1.0, 0.1)
    for f in random_probability(8, 5, rng, amplitude=0.9):
        d = mean_field_map(c, f)
        assert d.sup_derivative <= 1 + c.delta * c.d1_sup + 1e-12
        assert d.sup_second_derivative <= c.delta * c.d1_sup2 + 1e-12


def test_pushforward_shift():
    f = trig_polynomial(4, 1.0, cos={1: 1.0})
    assert pushforward(f, Shift(0.0)).allclose(f, 0.0)
    g = pushforward(f, Shift(0.25))
    assert g.coefficient(1) == pytest.approx(0.5 * np.exp(-0.5j * np.pi))
    x = np.arange(64) / 64
    assert np.allclose(evaluate(g, 64), 1 + np.cos(2 * np.pi * (x - 0.25)), atol=1e-13)


def test_pushforward_sampled_identity():
    f = trig_polynomial(8, 1.0, cos={1: 0.5}, sin={3: 0.2})
    d = Sampled.from_displacement(CircleDensity.zeros(2))
    assert pushforward(f, d).allclose(f, 1e-9)


def test_pushforward_sampled_matches_shift():
    f = trig_polynomial(8, 1.0, cos={2: 0.5})
    d = Sampled.from_displacement(CircleDensity.constant(0.1, 2))
    assert pushforward(f, d).allclose(pushforward(f, Shift(0.1)), 1e-9)


def test_pushforward_preserves_probability(rng):
    c = GeneralKernel.sine_difference(1.0, 0.1)
    for f in random_probability(16, 5, rng, amplitude=0.9):
        g = pushforward(f, mean_field_map(c, f))
        assert abs(g.mass - f.mass) <= 1e-10
        assert is_probability(g.with_mass(1.0))


def test_barycenter_examples():
    b = barycenter_stats(CircleDensity.constant(1.0, 4))
    assert b.degenerate and b.W == 0
    f = trig_polynomial(4, 1.0, cos={1: 1.0})
    b = barycenter_stats(f)
    assert b.z == pytest.approx(0.5) and b.W == pytest.approx(0.25) and b.xbar == pytest.approx(0)
    # oracle: first circular moment by quadrature
    x = np.arange(256) / 256
    assert b.z == pytest.approx(np.mean(np.exp(2j * np.pi * x) * evaluate(f, 256)))


def test_barycenter_rotation_equivariance():
    f = trig_polynomial(4, 1.0, cos={1: 0.6}, sin={2: 0.3})
    g = pushforward(f, Shift(0.3))
    b0, b1 = barycenter_stats(f), barycenter_stats(g)
    assert b1.W == pytest.approx(b0.W)
    assert (b1.xbar - b0.xbar - 0.3) % 1.0 == pytest.approx(0.0, abs=1e-12)


def test_wrapped_gaussian():
    assert wrapped_gaussian(0.37, 0.1).mass == 1.0
    g = wrapped_gaussian(0.1, 2.0)
    assert np.max(np.abs(np.delete(g.coeffs, g.max_mode))) < 1e-30
    x = np.arange(2048) / 2048
    vals = evaluate(wrapped_gaussian(0.2, 0.25), 2048)
    z = np.mean(np.exp(2j * np.pi * x) * vals)
    assert abs(z) ** 2 == pytest.approx(np.exp(-4 * np.pi ** 2 * 0.25 ** 2), rel=1e-10)


def test_psi_of_requires_barycenter():
    with pytest.raises(DegenerateBarycenterError):
        psi_of(CircleDensity.constant(1.0, 4), 0.3)


def test_psi_dot_kills_other_modes_and_radial_directions():
    phi = trig_polynomial(16, 1.0, cos={1: 1.0})
    P = psi_dot_matrix(phi, 0.3, 16)
    assert np.allclose(P.apply(cos_density(16, 2)).coeffs, 0)
    assert np.allclose(P.apply(cos_density(16, 1, 0.7)).coeffs, 0, atol=1e-15)


def test_psi_dot_matches_finite_difference():
    N, sigma, t = 32, 0.3, 1e-5
    phi = trig_polynomial(N, 1.0, cos={1: 1.0})
    g = trig_polynomial(N, sin={1: 2.0})
    fd = (psi_of(phi + g * t, sigma, N) - psi_of(phi, sigma, N)) * (1 / t)
    assert analytic_norms(fd - psi_dot_matrix(phi, sigma, N).apply(g)).strong < 1e-4


def test_translation_lipschitz_constant(rng):
    """Fitted C0 of the shift-family regularity estimate stays below sup|H|."""
    H = standard_H()
    delta = 0.5
    c = Translation(H, delta)
    h = trig_polynomial(16, 1.0, cos={1: 0.3, 3: 0.1})
    ratios = []
    for f1, f2 in zip(random_probability(16, 20, rng), random_probability(16, 20, rng)):
        diff = analytic_norms(pushforward(h, mean_field_map(c, f1))
                              - pushforward(h, mean_field_map(c, f2))).strong
        ratios.append(diff / (delta * analytic_norms(h).strongest * analytic_norms(f1 - f2).weak))
    sup_H = np.max(np.abs(evaluate(H, 4096)))
    assert np.isfinite(max(ratios)) and max(ratios) <= sup_H


def test_serialization_round_trip():
    for c in (Translation(standard_H(), 0.4), Stochastic(0.3, 0.05),
              GeneralKernel.sine_difference(0.5, 0.1)):
        d = coupling_from_dict(c.to_dict())
        assert type(d) is type(c) and d.delta == c.delta
