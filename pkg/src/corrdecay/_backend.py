"""Kernel selection.

The compiled kernel is preferred; set ``CORRDECAY_KERNEL=python`` to force
the pure-Python fallback.
"""

import os

from . import _pykernel

try:
    from . import _ckernel
except ImportError:  # extension not built
    _ckernel = None

_KERNELS = {"python": _pykernel}
if _ckernel is not None:
    _KERNELS["cython"] = _ckernel


def available():
    return sorted(_KERNELS)


def get_kernel(name=None):
    """Return the kernel module called ``name`` (default: the active one)."""
    if name is None:
        return kernel
    try:
        return _KERNELS[name]
    except KeyError:
        raise ValueError(f"kernel {name!r} not available; have {available()}") from None


_requested = os.environ.get("CORRDECAY_KERNEL", "").strip().lower()
if _requested:
    kernel = get_kernel(_requested)
else:
    kernel = _ckernel if _ckernel is not None else _pykernel
