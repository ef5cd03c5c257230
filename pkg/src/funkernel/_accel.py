"""Hot pairwise kernels with a numba path and a pure-numpy fallback.

The numba versions are used when numba imports and the environment variable
``FUNKERNEL_DISABLE_NUMBA`` is unset (or ``0``/``false``).  Both paths are
always importable as ``numpy_impl`` / ``numba_impl`` so they can be compared.
"""

import os
from types import SimpleNamespace

import numpy as np


def _env_disabled() -> bool:
    return os.environ.get("FUNKERNEL_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")


# ---------------------------------------------------------------- numpy


def _np_sqdist_weighted(A, B, w):
    # chunked over rows of A to bound the (rows, nb, m) temporary
    out = np.empty((A.shape[0], B.shape[0]))
    step = max(1, 2_000_000 // max(1, B.shape[0] * A.shape[1]))
    for i0 in range(0, A.shape[0], step):
        d = A[i0:i0 + step, None, :] - B[None, :, :]
        out[i0:i0 + step] = np.einsum("ijl,l->ij", d * d, w)
    return out


def _np_inner_weighted(A, B, w):
    return (A * w) @ B.T


def _np_gaussian_1d(a, b, sigma):
    d = a[:, None] - b[None, :]
    return np.exp(-(d * d) / (2.0 * sigma * sigma))


def _np_kron(K, B):
    return np.kron(K, B)


numpy_impl = SimpleNamespace(
    sqdist_weighted=_np_sqdist_weighted,
    inner_weighted=_np_inner_weighted,
    gaussian_1d=_np_gaussian_1d,
    kron=_np_kron,
)

# ---------------------------------------------------------------- numba

try:
    import numba
    from numba import njit, prange

    # the bundled TBB is often too old; prefer OpenMP, then the builtin workqueue
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False
    numba_impl = None

if HAVE_NUMBA:

    @njit(parallel=True, cache=True)
    def _nb_sqdist_weighted(A, B, w):
        na, m = A.shape
        nb = B.shape[0]
        out = np.empty((na, nb))
        for i in prange(na):
            for j in range(nb):
                acc = 0.0
                for l in range(m):
                    d = A[i, l] - B[j, l]
                    acc += w[l] * d * d
                out[i, j] = acc
        return out

    @njit(parallel=True, cache=True)
    def _nb_inner_weighted(A, B, w):
        na, m = A.shape
        nb = B.shape[0]
        out = np.empty((na, nb))
        for i in prange(na):
            for j in range(nb):
                acc = 0.0
                for l in range(m):
                    acc += w[l] * (A[i, l] * B[j, l])
                out[i, j] = acc
        return out

    @njit(cache=True)
    def _nb_gaussian_1d(a, b, sigma):
        c = 1.0 / (2.0 * sigma * sigma)
        out = np.empty((a.size, b.size))
        for i in range(a.size):
            for j in range(b.size):
                d = a[i] - b[j]
                out[i, j] = np.exp(-d * d * c)
        return out

    @njit(parallel=True, cache=True)
    def _nb_kron(K, B):
        n1, n2 = K.shape
        m1, m2 = B.shape
        out = np.empty((n1 * m1, n2 * m2))
        for i in prange(n1):
            for j in range(n2):
                k = K[i, j]
                for a in range(m1):
                    for b in range(m2):
                        out[i * m1 + a, j * m2 + b] = k * B[a, b]
        return out

    numba_impl = SimpleNamespace(
        sqdist_weighted=_nb_sqdist_weighted,
        inner_weighted=_nb_inner_weighted,
        gaussian_1d=_nb_gaussian_1d,
        kron=_nb_kron,
    )

USE_NUMBA = HAVE_NUMBA and not _env_disabled()
_impl = numba_impl if USE_NUMBA else numpy_impl


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def sqdist_weighted(A, B, w) -> np.ndarray:
    """``out[i, j] = sum_l w[l] * (A[i, l] - B[j, l])**2``."""
    return _impl.sqdist_weighted(_c(A), _c(B), _c(w))


def inner_weighted(A, B, w) -> np.ndarray:
    """``out[i, j] = sum_l w[l] * A[i, l] * B[j, l]``."""
    return _impl.inner_weighted(_c(A), _c(B), _c(w))


def gaussian_1d(a, b, sigma: float) -> np.ndarray:
    """``exp(-(a[i] - b[j])**2 / (2 sigma**2))``."""
    return _impl.gaussian_1d(_c(a), _c(b), float(sigma))


def kron(K, B) -> np.ndarray:
    """Dense Kronecker product with sample-major block layout."""
    return _impl.kron(_c(K), _c(B))


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


def set_threads(n: int) -> None:
    """Set numba worker threads; ``0`` keeps the default."""
    if n and USE_NUMBA:
        numba.set_num_threads(min(int(n), numba.config.NUMBA_NUM_THREADS))
