"""Cross-check the numba and numpy paths of every hot kernel."""
import os
import subprocess
import sys

import numpy as np
import pytest

from sto_lab import _kernels
from sto_lab._kernels import KERNELS


@pytest.fixture
def data():
    r = np.random.default_rng(7)
    x = np.sort(r.uniform(size=300))
    phase = 3 * x + 0.1 * np.sin(2 * np.pi * x)
    c = r.standard_normal(11) + 1j * r.standard_normal(11)
    return x, phase, 0.5 * (c + np.conj(c[::-1]))


def test_oscillatory_matrix_paths_agree(data):
    x, phase, _ = data
    a, b = (f(x, phase, 6, 9) for f in KERNELS["oscillatory_matrix"])
    assert a.shape == (13, 19)
    assert np.allclose(a, b, atol=1e-12)


def test_oscillatory_matrix_direct_sum(data):
    x, phase, _ = data
    n, m = 2, -3
    ref = np.mean(np.exp(2j * np.pi * (m * x - n * phase)))
    assert _kernels.oscillatory_matrix(x, phase, 4, 4)[n + 4, m + 4] == pytest.approx(ref, abs=1e-13)


def test_empirical_moments_paths_agree(data):
    x = data[0]
    a, b = (f(x, 12) for f in KERNELS["empirical_moments"])
    assert np.allclose(a, b, atol=1e-13)
    assert a[0] == pytest.approx(1.0)
    assert a[3] == pytest.approx(np.mean(np.exp(-6j * np.pi * x)), abs=1e-13)


def test_trig_eval_paths_agree(data):
    x, _, c = data
    a, b = (f(c, x) for f in KERNELS["trig_eval"])
    ref = np.real(np.exp(2j * np.pi * np.outer(x, np.arange(-5, 6))) @ c)
    assert np.allclose(a, ref, atol=1e-12) and np.allclose(b, ref, atol=1e-12)


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, STO_LAB_PURE_NUMPY="1")
    out = subprocess.run([sys.executable, "-c", "from sto_lab import _kernels; print(_kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
