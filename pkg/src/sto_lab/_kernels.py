"""Hot numeric kernels, each with a numba path and a pure-numpy path.

The numba path is used when numba imports cleanly and the environment
variable ``STO_LAB_PURE_NUMPY`` is unset (or "0").  Setting it to "1"
forces the numpy fallback everywhere; both paths compute the same sums and
are cross-checked in ``tests/test_kernels.py``.

All kernels work with the unit-circle Fourier convention e^{2 pi i n x}.
"""
import os
import warnings

import numpy as np

TWO_PI = 2.0 * np.pi

# rows of the outer-product exponentials processed per numpy chunk
_CHUNK = 4096

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False
    warnings.warn("numba not importable; sto_lab falls back to numpy kernels")

    def njit(*args, **kwargs):
        def decorator(func):
            return func

        if args and callable(args[0]):
            return args[0]
        return decorator


def _env_pure_numpy():
    return os.environ.get("STO_LAB_PURE_NUMPY", "0").strip().lower() in ("1", "true", "yes", "on")


USE_NUMBA = HAVE_NUMBA and not _env_pure_numpy()
BACKEND = "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# oscillatory matrix:  A[n, m] = mean_j exp(2 pi i (m x_j - n phase_j))
# ---------------------------------------------------------------------------


def _oscillatory_matrix_numpy(x, phase, n_out, n_in):
    x = np.asarray(x, dtype=np.float64)
    phase = np.asarray(phase, dtype=np.float64)
    m = np.arange(-n_in, n_in + 1)
    n = np.arange(-n_out, n_out + 1)
    out = np.zeros((2 * n_out + 1, 2 * n_in + 1), dtype=np.complex128)
    for start in range(0, x.size, _CHUNK):
        xs = x[start:start + _CHUNK]
        ps = phase[start:start + _CHUNK]
        e_in = np.exp(1j * TWO_PI * np.outer(xs, m))
        e_out = np.exp(-1j * TWO_PI * np.outer(n, ps))
        out += e_out @ e_in
    return out / x.size


@njit(cache=True)
def _oscillatory_matrix_numba(x, phase, n_out, n_in):
    size = x.shape[0]
    rows = 2 * n_out + 1
    cols = 2 * n_in + 1
    e_in = np.empty((size, cols), dtype=np.complex128)
    e_out = np.empty((size, rows), dtype=np.complex128)
    for j in range(size):
        w = np.exp(1j * TWO_PI * x[j])
        v = np.exp(-1j * TWO_PI * n_in * x[j])
        for c in range(cols):
            e_in[j, c] = v
            v *= w
        w = np.exp(-1j * TWO_PI * phase[j])
        v = np.exp(1j * TWO_PI * n_out * phase[j])
        for r in range(rows):
            e_out[j, r] = v
            v *= w
    # exponentials by recurrence above, the contraction goes to BLAS
    return np.dot(np.ascontiguousarray(e_out.T), e_in) / size


def oscillatory_matrix(x, phase, n_out, n_in):
    """Rectangle-rule matrix of ``m -> n`` couplings for the map ``x -> phase``.

    Parameters
    ----------
    x : ndarray
        Uniform grid on [0, 1).
    phase : ndarray
        Lifted map values at ``x`` (not reduced mod 1).
    n_out, n_in : int
        Output and input truncation levels.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    phase = np.ascontiguousarray(phase, dtype=np.float64)
    if USE_NUMBA:
        return _oscillatory_matrix_numba(x, phase, int(n_out), int(n_in))
    return _oscillatory_matrix_numpy(x, phase, n_out, n_in)


# ---------------------------------------------------------------------------
# empirical moments:  mu_n = mean_j exp(-2 pi i n x_j),  n = 0..K
# ---------------------------------------------------------------------------


def _empirical_moments_numpy(x, n_max):
    x = np.asarray(x, dtype=np.float64)
    n = np.arange(n_max + 1)
    acc = np.zeros(n_max + 1, dtype=np.complex128)
    for start in range(0, x.size, _CHUNK):
        acc += np.exp(-1j * TWO_PI * np.outer(x[start:start + _CHUNK], n)).sum(axis=0)
    return acc / x.size


@njit(cache=True)
def _empirical_moments_numba(x, n_max):
    acc = np.zeros(n_max + 1, dtype=np.complex128)
    for j in range(x.shape[0]):
        w = np.exp(-1j * TWO_PI * x[j])
        v = 1.0 + 0.0j
        for n in range(n_max + 1):
            acc[n] += v
            v *= w
    return acc / x.shape[0]


def empirical_moments(x, n_max):
    """Fourier coefficients ``mean_j exp(-2 pi i n x_j)`` for ``n = 0..n_max``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if USE_NUMBA:
        return _empirical_moments_numba(x, int(n_max))
    return _empirical_moments_numpy(x, n_max)


# ---------------------------------------------------------------------------
# trigonometric evaluation:  f(x_j) = Re sum_{|n|<=K} c_n exp(2 pi i n x_j)
# ---------------------------------------------------------------------------


def _trig_eval_numpy(coeffs, x):
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    k = (coeffs.size - 1) // 2
    n = np.arange(-k, k + 1)
    x = np.asarray(x, dtype=np.float64)
    out = np.empty(x.size)
    for start in range(0, x.size, _CHUNK):
        block = np.exp(1j * TWO_PI * np.outer(x[start:start + _CHUNK], n)) @ coeffs
        out[start:start + _CHUNK] = block.real
    return out


@njit(cache=True)
def _trig_eval_numba(coeffs, x):
    k = (coeffs.shape[0] - 1) // 2
    out = np.empty(x.shape[0])
    for j in range(x.shape[0]):
        w = np.exp(1j * TWO_PI * x[j])
        v = np.exp(-1j * TWO_PI * k * x[j])
        s = 0.0 + 0.0j
        for i in range(coeffs.shape[0]):
            s += coeffs[i] * v
            v *= w
        out[j] = s.real
    return out


def trig_eval(coeffs, x):
    """Evaluate a real trigonometric polynomial at scattered points."""
    coeffs = np.ascontiguousarray(coeffs, dtype=np.complex128)
    x = np.ascontiguousarray(x, dtype=np.float64)
    if USE_NUMBA:
        return _trig_eval_numba(coeffs, x)
    return _trig_eval_numpy(coeffs, x)


KERNELS = {
    "oscillatory_matrix": (_oscillatory_matrix_numpy, _oscillatory_matrix_numba),
    "empirical_moments": (_empirical_moments_numpy, _empirical_moments_numba),
    "trig_eval": (_trig_eval_numpy, _trig_eval_numba),
}
