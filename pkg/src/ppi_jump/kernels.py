"""Backend selection for the path kernels.

The compiled extension is used when it imports; otherwise, or when
``PPI_JUMP_PURE_PYTHON`` is set, the NumPy versions are used.
"""

import os

import numpy as np

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["cython"] = _ckernels

if _ckernels is not None and not os.environ.get("PPI_JUMP_PURE_PYTHON"):
    BACKEND = "cython"
else:
    BACKEND = "python"


def get(name=None):
    """Kernel module for ``name`` (default: the active backend)."""
    name = name or BACKEND
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} is not available; have {sorted(BACKENDS)}") from None


def _prep(t, W, ptr, jump_times):
    return (
        np.ascontiguousarray(t, dtype=np.float64),
        np.ascontiguousarray(W, dtype=np.float64),
        np.ascontiguousarray(ptr, dtype=np.int64),
        np.ascontiguousarray(jump_times, dtype=np.float64),
    )


def levy_exp_grid(t, W, ptr, jump_times, log_abs, neg, a, b, x0, backend=None):
    t, W, ptr, jump_times = _prep(t, W, ptr, jump_times)
    log_abs = np.ascontiguousarray(log_abs, dtype=np.float64)
    neg = np.ascontiguousarray(neg, dtype=bool)
    impl = get(backend)
    if impl is _pykernels:
        return impl.levy_exp_grid(t, W, ptr, jump_times, log_abs, neg, a, b, x0)
    return impl.levy_exp_grid(t, W, ptr, jump_times, log_abs, neg.view(np.uint8), float(a), float(b), float(x0))


def bridge_at_jumps(t, W, ptr, jump_times, z, backend=None):
    t, W, ptr, jump_times = _prep(t, W, ptr, jump_times)
    z = np.ascontiguousarray(z, dtype=np.float64)
    return get(backend).bridge_at_jumps(t, W, ptr, jump_times, z)


def first_breach(ptr, factors, backend=None):
    ptr = np.ascontiguousarray(ptr, dtype=np.int64)
    factors = np.ascontiguousarray(factors, dtype=np.float64)
    return get(backend).first_breach(ptr, factors)
