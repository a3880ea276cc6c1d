import numpy as np
import pytest

from sto_lab import CircleDensity, ExpandingMapSpec, StoModel, Stochastic, Translation
from sto_lab.density import trig_polynomial

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = {}


def standard_H(max_mode=8):
    """H(y) = cos(2 pi y) + 0.5 cos(4 pi y)."""
    return trig_polynomial(max_mode, cos={1: 1.0, 2: 0.5})


def translation_model(N=32, delta=1.0, epsilon=0.0, mode=1, amplitude=1.0):
    p = trig_polynomial(max(mode, 1), sin={mode: amplitude})
    return StoModel(ExpandingMapSpec(2, p, epsilon), Translation(standard_H(), delta), N)


def stochastic_model(N=32, delta=0.05, sigma=0.3):
    return StoModel(ExpandingMapSpec.linear(2), Stochastic(sigma, delta), N)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def linear_model():
    return translation_model()


@pytest.fixture(scope="session")
def perturbed_model():
    return translation_model(epsilon=0.05)


@pytest.fixture(scope="session")
def perturbed_fixed(perturbed_model):
    from sto_lab import fixed_point

    rep = fixed_point(perturbed_model, perturbed_model.lebesgue(), tol=1e-13, solver="newton")
    assert rep.converged
    return rep.h


def cos_density(N, n=1, amp=1.0, const=0.0) -> CircleDensity:
    return trig_polynomial(N, const, cos={n: amp})


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
