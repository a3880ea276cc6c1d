import numpy as np
import pytest

from oracles import preimage_pushforward
from sto_lab.density import CircleDensity, trig_polynomial
from sto_lab.exceptions import NotExpandingError
from sto_lab.maps import ExpandingMapSpec, expansion_audit, map_eval, transfer_matrix


def test_map_eval_linear():
    T = ExpandingMapSpec.linear(2)
    assert map_eval(T, 0.3) == pytest.approx(0.6)
    assert map_eval(T, 0.3, 1) == 2.0
    assert map_eval(T, 0.7) == pytest.approx(0.4)
    assert map_eval(T, 0.7, lifted=True) == pytest.approx(1.4)


def test_map_eval_derivatives():
    T = ExpandingMapSpec.sine_perturbed(2, 0.05)
    assert map_eval(T, 0.0, 1) == pytest.approx(2 + 0.05 * 2 * np.pi)
    h, x = 1e-4, 0.25
    # third derivative via central differences of T''
    fd3 = (map_eval(T, x + h, 2) - map_eval(T, x - h, 2)) / (2 * h)
    assert map_eval(T, x, 3) == pytest.approx(fd3, abs=1e-5 * (2 * np.pi) ** 3)
    with pytest.raises(ValueError):
        map_eval(T, x, 4)


def test_expansion_audit():
    assert expansion_audit(ExpandingMapSpec.linear(2))[0] == 2.0
    sigma, c3 = expansion_audit(ExpandingMapSpec.sine_perturbed(2, 0.1))
    assert sigma == pytest.approx(2 - 0.2 * np.pi, abs=1e-9)
    assert np.isfinite(c3)
    T = ExpandingMapSpec.sine_perturbed(2, 0.2)
    with pytest.raises(NotExpandingError):
        expansion_audit(T, shift_bound=0.3)


def test_perturbation_modes_limited():
    with pytest.raises(ValueError):
        ExpandingMapSpec(2, trig_polynomial(9, sin={9: 1.0}), 0.01)
    with pytest.raises(ValueError):
        ExpandingMapSpec(1)


def test_doubling_is_decimation():
    A = transfer_matrix(ExpandingMapSpec.linear(2), 8)
    f2 = CircleDensity.from_modes(8, {2: 1.0})
    assert A.apply(f2).allclose(CircleDensity.from_modes(8, {1: 1.0}), 1e-12)
    assert np.allclose(A.apply(CircleDensity.from_modes(8, {1: 1.0})).coeffs, 0, atol=1e-12)
    assert A.apply(CircleDensity.constant(1.0, 8)).allclose(CircleDensity.constant(1.0, 8), 1e-12)


def test_tripling_is_decimation():
    A = transfer_matrix(ExpandingMapSpec.linear(3), 6).entries
    expected = np.zeros_like(A)
    for n in range(-6, 7):
        if abs(3 * n) <= 6:
            expected[n + 6, 3 * n + 6] = 1.0
    assert np.allclose(A, expected, atol=1e-12)


@pytest.mark.parametrize("T", [
    ExpandingMapSpec.sine_perturbed(2, 0.05),
    ExpandingMapSpec.sine_perturbed(3, 0.1, mode=2),
    ExpandingMapSpec(2, trig_polynomial(3, 0.2, cos={1: 0.5, 3: 0.2}), 0.08),
])
def test_transfer_matrix_matches_preimage_oracle(T):
    N = 12
    f = trig_polynomial(N, 1.0, cos={1: 0.3, 4: 0.1}, sin={2: -0.2, 7: 0.05})
    ref = preimage_pushforward(T, f, N)
    assert np.allclose(transfer_matrix(T, N).apply(f).coeffs, ref, atol=1e-8)


def test_markov_row():
    A = transfer_matrix(ExpandingMapSpec.sine_perturbed(2, 0.1), 16)
    assert A.mass_row_defect() <= 1e-9
