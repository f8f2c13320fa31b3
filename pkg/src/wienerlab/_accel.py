"""Backend selection for the hot numeric kernels.

The package evaluates sparse Hermite-monomial expansions at large sample
matrices (10^5 .. 10^6 rows) in every Monte Carlo estimator, so this inner
loop gets a numba @njit implementation with a pure-numpy fallback.

The backend is chosen once at import time from the environment variable
``WIENERLAB_BACKEND``:

* ``auto`` (default) -- numba if it imports, numpy otherwise
* ``numba``          -- require numba, raise if unavailable
* ``numpy``          -- force the pure-numpy path

Both paths compute the same sums; they are compared in the test suite and
in ``benchmarks/bench_backends.py``.
"""

import os

import numpy as np

_choice = os.environ.get("WIENERLAB_BACKEND", "auto").lower()
if _choice not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"WIENERLAB_BACKEND must be 'auto', 'numba' or 'numpy', got {_choice!r}"
    )

_HAVE_NUMBA = False
if _choice in ("auto", "numba"):
    try:
        from numba import njit

        _HAVE_NUMBA = True
    except ImportError:
        if _choice == "numba":
            raise
        _HAVE_NUMBA = False


def hermite_batch_numpy(x, nmax):
    """Probabilists' Hermite values H_0..H_nmax on an array.

    Returns an array of shape (nmax+1,) + x.shape using the recursion
    H_{n+1}(x) = x H_n(x) - n H_{n-1}(x).
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.empty((nmax + 1,) + x.shape, dtype=np.float64)
    out[0] = 1.0
    if nmax >= 1:
        out[1] = x
    for n in range(1, nmax):
        out[n + 1] = x * out[n] - n * out[n - 1]
    return out


def eval_terms_numpy(coeffs, ptr, dirs, mults, samples):
    """Evaluate a packed Hermite-monomial expansion at each sample row.

    Term t contributes coeffs[t] * prod_k H_{mults[k]}(samples[:, dirs[k]])
    over k in [ptr[t], ptr[t+1]).
    """
    n_rows = samples.shape[0]
    acc = np.zeros(n_rows, dtype=np.float64)
    if len(coeffs) == 0:
        return acc
    nmax = int(mults.max()) if len(mults) else 0
    table = hermite_batch_numpy(samples, nmax)
    for t in range(len(coeffs)):
        term = np.full(n_rows, coeffs[t])
        for k in range(ptr[t], ptr[t + 1]):
            term = term * table[mults[k]][:, dirs[k]]
        acc += term
    return acc


if _HAVE_NUMBA:

    @njit(cache=True)
    def _herm(m, x):
        if m == 0:
            return 1.0
        hp, h = 1.0, x
        for n in range(1, m):
            hp, h = h, x * h - n * hp
        return h

    @njit(cache=True)
    def _eval_terms_numba(coeffs, ptr, dirs, mults, samples):
        n_rows = samples.shape[0]
        out = np.zeros(n_rows, dtype=np.float64)
        for i in range(n_rows):
            acc = 0.0
            for t in range(len(coeffs)):
                term = coeffs[t]
                for k in range(ptr[t], ptr[t + 1]):
                    term *= _herm(mults[k], samples[i, dirs[k]])
                acc += term
            out[i] = acc
        return out

    def eval_terms_numba(coeffs, ptr, dirs, mults, samples):
        return _eval_terms_numba(coeffs, ptr, dirs, mults, samples)


if _HAVE_NUMBA and _choice in ("auto", "numba"):
    BACKEND = "numba"
    eval_terms = eval_terms_numba
else:
    BACKEND = "numpy"
    eval_terms = eval_terms_numpy


def active_backend():
    """Name of the kernel backend selected at import time."""
    return BACKEND
