"""Backend selection for the bit-level kernels.

The compiled extension is used when it was built; setting
``MULSEDGE_PURE_PYTHON=1`` forces the numpy fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
if os.environ.get("MULSEDGE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
else:
    _impl = _pykernels

q99_encode = _impl.q99_encode
q99_decode = _impl.q99_decode
qam_map = _impl.qam_map
qam_demap = _impl.qam_demap

__all__ = ["BACKEND", "q99_encode", "q99_decode", "qam_map", "qam_demap"]
