"""JIT-compiled views of the scalar activations.

The same Python source from activations.py is compiled two ways: as element
-wise ufuncs (f32 for the NN benchmark path, f64 for oracle work) and as
scalar callees inside a reduction loop for the micro-benchmark.  Compilation
results are cached per catalog name for the lifetime of the process.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from numba import njit, vectorize

from .activations import get_activation

UFUNC_SIGNATURES = ["float32(float32)", "float64(float64)"]


@lru_cache(maxsize=None)
def ufunc(name: str):
    """Element-wise value kernel for a catalog activation."""
    spec = get_activation(name)
    return vectorize(UFUNC_SIGNATURES, nopython=True)(spec.fn)


@lru_cache(maxsize=None)
def ufunc_deriv(name: str):
    """Element-wise analytic-derivative kernel."""
    spec = get_activation(name)
    return vectorize(UFUNC_SIGNATURES, nopython=True)(spec.deriv)


@lru_cache(maxsize=None)
def scalar(name: str):
    """The activation as a jitted scalar callee (for composing into loops)."""
    spec = get_activation(name)
    return njit(spec.fn)


@lru_cache(maxsize=None)
def bench_loop(name: str):
    """acc += f(x_i) over a whole array; the checksum defeats dead-code
    elimination and doubles as a determinism probe."""
    f = scalar(name)

    @njit
    def loop(xs):
        acc = 0.0
        for i in range(xs.shape[0]):
            acc += f(xs[i])
        return acc

    return loop


def warmup(names) -> None:
    """Force JIT compilation of value+derivative kernels ahead of any timer."""
    probe32 = np.zeros(4, dtype=np.float32)
    probe64 = np.zeros(4, dtype=np.float64)
    for name in names:
        ufunc(name)(probe32)
        ufunc(name)(probe64)
        ufunc_deriv(name)(probe32)
        ufunc_deriv(name)(probe64)
