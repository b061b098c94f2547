"""Convolution patch kernels.

The compiled extension is used when it has been built; otherwise the numpy
implementation is selected. Set ``MMWCE_KERNELS=python`` to force the
fallback.
"""
import os

from . import _pykernels

BACKENDS = {"python": _pykernels}

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None
else:
    BACKENDS["cython"] = _ckernels

if os.environ.get("MMWCE_KERNELS", "").lower() == "python" or _ckernels is None:
    BACKEND = "python"
else:
    BACKEND = "cython"


def get_backend(name=None):
    """Return the kernel module for ``name`` (default: the active backend)."""
    name = BACKEND if name is None else name
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} is not available") from None


def im2col3x3(x):
    return BACKENDS[BACKEND].im2col3x3(x)


def col2im3x3(cols, B, H, W, C):
    return BACKENDS[BACKEND].col2im3x3(cols, B, H, W, C)
