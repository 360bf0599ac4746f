"""Hot pointwise kernels with a numba backend and a pure-numpy fallback.

Every inner loop of the solvers reduces to one of three array ops on the
flattened component arrays of a vector field:

  * ``mag_pow_sum``      -- sum of (x^2+y^2+z^2)^(q/2), the core of every
                            L^q norm and energy term,
  * ``mag_pow_sum_w``    -- same with a per-node quadrature weight
                            (meridian grids carry the 2*pi*r factor),
  * ``mag_pow_scale``    -- componentwise (x^2+y^2+z^2+eps^2)^(e/2) * x_i,
                            the density |g|^(q-2) g of every gradient and
                            optimality defect.

The backend is chosen once at import time: numba when importable, unless
the environment variable ``PCURL_NUMBA`` is set to ``0``/``off``/``false``
(then the numpy path is used).  Both implementations are kept importable
so ``benchmarks/bench_kernels.py`` can time them against each other.
Kernels are compiled serially (no ``parallel=True``) so reductions are
deterministic for a fixed backend.
"""

import os

import numpy as np


def _numpy_mag_pow_sum(x, y, z, q):
    m2 = x * x + y * y + z * z
    return float(np.sum(m2 ** (q / 2.0)))


def _numpy_mag_pow_sum_w(x, y, z, w, q):
    m2 = x * x + y * y + z * z
    return float(np.sum(w * m2 ** (q / 2.0)))


def _numpy_mag_pow_scale(x, y, z, expo, eps):
    m2 = x * x + y * y + z * z + eps * eps
    coef = m2 ** (expo / 2.0)
    return coef * x, coef * y, coef * z


def _numpy_abs_pow_sum(a, q):
    return float(np.sum(np.abs(a) ** q))


NUMPY_IMPLS = {
    "mag_pow_sum": _numpy_mag_pow_sum,
    "mag_pow_sum_w": _numpy_mag_pow_sum_w,
    "mag_pow_scale": _numpy_mag_pow_scale,
    "abs_pow_sum": _numpy_abs_pow_sum,
}

NUMBA_IMPLS = {}

try:  # pragma: no cover - exercised through the backend switch
    import numba

    @numba.njit(cache=True)
    def _nb_mag_pow_sum(x, y, z, q):
        acc = 0.0
        e = q / 2.0
        for i in range(x.size):
            m2 = x[i] * x[i] + y[i] * y[i] + z[i] * z[i]
            acc += m2 ** e
        return acc

    @numba.njit(cache=True)
    def _nb_mag_pow_sum_w(x, y, z, w, q):
        acc = 0.0
        e = q / 2.0
        for i in range(x.size):
            m2 = x[i] * x[i] + y[i] * y[i] + z[i] * z[i]
            acc += w[i] * m2 ** e
        return acc

    @numba.njit(cache=True)
    def _nb_mag_pow_scale(x, y, z, expo, eps):
        ox = np.empty_like(x)
        oy = np.empty_like(y)
        oz = np.empty_like(z)
        e = expo / 2.0
        e2 = eps * eps
        for i in range(x.size):
            m2 = x[i] * x[i] + y[i] * y[i] + z[i] * z[i] + e2
            c = m2 ** e
            ox[i] = c * x[i]
            oy[i] = c * y[i]
            oz[i] = c * z[i]
        return ox, oy, oz

    @numba.njit(cache=True)
    def _nb_abs_pow_sum(a, q):
        acc = 0.0
        for i in range(a.size):
            acc += abs(a[i]) ** q
        return acc

    def _nb_wrap(fn, nout=0):
        # numba kernels want contiguous 1-d views; reshape the callers' 3-d
        # arrays here so call sites stay shape-agnostic.
        if nout:
            def wrapped(x, y, z, expo, eps):
                shape = x.shape
                o = fn(np.ascontiguousarray(x).ravel(),
                       np.ascontiguousarray(y).ravel(),
                       np.ascontiguousarray(z).ravel(), expo, eps)
                return tuple(a.reshape(shape) for a in o)
            return wrapped

        def wrapped(*args):
            flat = tuple(np.ascontiguousarray(a).ravel()
                         if isinstance(a, np.ndarray) else a for a in args)
            return float(fn(*flat))
        return wrapped

    NUMBA_IMPLS = {
        "mag_pow_sum": _nb_wrap(_nb_mag_pow_sum),
        "mag_pow_sum_w": _nb_wrap(_nb_mag_pow_sum_w),
        "mag_pow_scale": _nb_wrap(_nb_mag_pow_scale, nout=3),
        "abs_pow_sum": _nb_wrap(_nb_abs_pow_sum),
    }
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False


def _want_numba():
    flag = os.environ.get("PCURL_NUMBA", "").strip().lower()
    if flag in ("0", "off", "false", "no"):
        return False
    return _HAVE_NUMBA


BACKEND = "numba" if _want_numba() else "numpy"
_ACTIVE = NUMBA_IMPLS if BACKEND == "numba" else NUMPY_IMPLS

mag_pow_sum = _ACTIVE["mag_pow_sum"]
mag_pow_sum_w = _ACTIVE["mag_pow_sum_w"]
mag_pow_scale = _ACTIVE["mag_pow_scale"]
abs_pow_sum = _ACTIVE["abs_pow_sum"]


def available_backends():
    """Names of the importable kernel backends."""
    return ("numpy", "numba") if _HAVE_NUMBA else ("numpy",)
