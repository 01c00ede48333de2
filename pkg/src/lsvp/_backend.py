"""Kernel backend chosen at import time.

The compiled extension is used when it imports; setting ``LSVP_PURE_PYTHON=1``
forces the numpy fallback.
"""

import os

from . import _kernels_py

_py = _kernels_py
_ext = None
if os.environ.get("LSVP_PURE_PYTHON") != "1":
    try:
        from . import _kernels as _ext
    except ImportError:
        _ext = None

_impl = _ext if _ext is not None else _py
BACKEND = "cython" if _ext is not None else "python"

lse_affine = _impl.lse_affine
lse_gauss = _impl.lse_gauss
legendre_rows = _impl.legendre_rows
legendre_rows_arg = _impl.legendre_rows_arg


def implementations():
    """Return the available backends as a name -> module mapping."""
    out = {"python": _py}
    if _ext is not None:
        out["cython"] = _ext
    return out
