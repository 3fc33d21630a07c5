"""Kernel selection: compiled extension when available, numpy otherwise.

Set MESHLESS_PURE_PYTHON=1 to force the numpy reference path (used by
the kernel benchmark to time both sides).
"""
import os

from . import _ref

_forced = os.environ.get("MESHLESS_PURE_PYTHON", "") not in ("", "0")
HAVE_COMPILED = False
if not _forced:
    try:
        from . import _core
        HAVE_COMPILED = True
    except ImportError:
        _core = None

if HAVE_COMPILED:
    weno_rhs_1d = _core.weno_rhs_1d
    weno_rhs_2d = _core.weno_rhs_2d
    mood_detect = _core.mood_detect
else:
    weno_rhs_1d = _ref.weno_rhs_1d
    weno_rhs_2d = _ref.weno_rhs_2d
    mood_detect = _ref.mood_detect

__all__ = ["weno_rhs_1d", "weno_rhs_2d", "mood_detect", "HAVE_COMPILED",
           "_ref"]
