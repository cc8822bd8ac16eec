"""Kernel selection: compiled extension when importable, numpy otherwise.

Set ``FERMIWICK_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _fallback

BACKEND = "python"
kernels = _fallback

if not os.environ.get("FERMIWICK_PURE_PYTHON"):
    try:
        from . import _core
    except ImportError:
        pass
    else:
        kernels = _core
        BACKEND = "cython"
