"""Hot inner loops of the adaptive 2x2 butterfly equalizer.

The per-symbol LMS/CMA update is inherently sequential (each step depends on
the taps left by the previous one), so it dominates the runtime of a full
simulation point.  Two interchangeable backends are provided:

* ``numba`` - the loops below compiled with ``@njit``.  Default whenever
  numba imports successfully.
* ``numpy`` - a pure-NumPy fallback that runs the same recursion with
  vectorized inner products.  Slower (Python-level symbol loop) but has no
  compiled dependency.

Selection is controlled by the ``CYCWDM_BACKEND`` environment variable:
``numba``, ``numpy``, or unset/``auto`` (numba if available).  The variable
is read at each kernel lookup so tests can switch backends at runtime.
``benchmarks/bench_equalizer.py`` compares the two.

Kernel conventions (shared by both backends):

* ``x_pad``  : (2, 2*n_steps + n_taps - 1) complex128, input at 2 Sa/symbol,
  circularly padded so the window for output symbol ``k`` is
  ``x_pad[:, 2k : 2k + n_taps]`` with the center tap aligned to sample ``2k``.
* ``w``      : (2, 2, n_taps) complex128 butterfly taps, updated in place.
* forward    : ``y_i = sum_j sum_t w[i,j,t] * window[j,t]``
* LMS update : ``w[i] += mu * (ref_i - y_i) * conj(window)``
* CMA update : ``w[i] += mu * y_i * (r2 - |y_i|^2) * conj(window)``
"""

from __future__ import annotations

import os

import numpy as np

BACKEND_ENV = "CYCWDM_BACKEND"

_COMPILED: dict = {}


def _lms_butterfly_loops(x_pad, steps, refs, valid, w, mu):
    # steps : (n,) int64 symbol indices to visit (ascending)
    # refs  : (2, n) complex128 desired symbols, refs[i, m] used iff valid[i, m]
    # valid : (2, n) uint8
    n_taps = w.shape[2]
    for m in range(steps.shape[0]):
        s = 2 * steps[m]
        for i in range(2):
            if valid[i, m] == 0:
                continue
            acc = 0.0 + 0.0j
            for j in range(2):
                for t in range(n_taps):
                    acc += w[i, j, t] * x_pad[j, s + t]
            err = mu * (refs[i, m] - acc)
            for j in range(2):
                for t in range(n_taps):
                    w[i, j, t] += err * np.conj(x_pad[j, s + t])


def _cma_butterfly_loops(x_pad, w, mu, r2, n_steps, out, adapt):
    n_taps = w.shape[2]
    for k in range(n_steps):
        s = 2 * k
        for i in range(2):
            acc = 0.0 + 0.0j
            for j in range(2):
                for t in range(n_taps):
                    acc += w[i, j, t] * x_pad[j, s + t]
            out[i, k] = acc
            if adapt:
                mod2 = acc.real * acc.real + acc.imag * acc.imag
                err = mu * (r2 - mod2) * acc
                for j in range(2):
                    for t in range(n_taps):
                        w[i, j, t] += err * np.conj(x_pad[j, s + t])


def _lms_butterfly_numpy(x_pad, steps, refs, valid, w, mu):
    n_taps = w.shape[2]
    for m in range(steps.shape[0]):
        s = 2 * int(steps[m])
        win = x_pad[:, s : s + n_taps]
        win_c = win.conj()
        for i in range(2):
            if not valid[i, m]:
                continue
            y = np.dot(w[i, 0], win[0]) + np.dot(w[i, 1], win[1])
            w[i] += (mu * (refs[i, m] - y)) * win_c


def _cma_butterfly_numpy(x_pad, w, mu, r2, n_steps, out, adapt):
    n_taps = w.shape[2]
    for k in range(n_steps):
        s = 2 * k
        win = x_pad[:, s : s + n_taps]
        y0 = np.dot(w[0, 0], win[0]) + np.dot(w[0, 1], win[1])
        y1 = np.dot(w[1, 0], win[0]) + np.dot(w[1, 1], win[1])
        out[0, k] = y0
        out[1, k] = y1
        if adapt:
            win_c = win.conj()
            w[0] += (mu * (r2 - (y0.real * y0.real + y0.imag * y0.imag)) * y0) * win_c
            w[1] += (mu * (r2 - (y1.real * y1.real + y1.imag * y1.imag)) * y1) * win_c


def resolve_backend() -> str:
    """Return the active backend name, honoring ``CYCWDM_BACKEND``."""
    requested = os.environ.get(BACKEND_ENV, "auto").strip().lower() or "auto"
    if requested == "numpy":
        return "numpy"
    if requested == "numba":
        _require_numba()
        return "numba"
    if requested != "auto":
        raise ValueError(
            f"{BACKEND_ENV} must be 'numba', 'numpy' or 'auto', got {requested!r}"
        )
    try:
        _require_numba()
    except ImportError:
        return "numpy"
    return "numba"


def _require_numba():
    if "njit" not in _COMPILED:
        from numba import njit  # deferred: numpy backend must not need numba

        _COMPILED["njit"] = njit
    return _COMPILED["njit"]


def _numba_kernels():
    if "pair" not in _COMPILED:
        njit = _require_numba()
        jit = njit(cache=True, fastmath=False)
        _COMPILED["pair"] = (
            jit(_lms_butterfly_loops),
            jit(_cma_butterfly_loops),
        )
    return _COMPILED["pair"]


def get_kernels():
    """Return ``(lms_butterfly, cma_butterfly)`` for the active backend."""
    if resolve_backend() == "numba":
        return _numba_kernels()
    return _lms_butterfly_numpy, _cma_butterfly_numpy
