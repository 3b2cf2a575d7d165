"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when importable; otherwise the
numpy fallback in ``_pykernels``. Set ``ETTD_PURE_PYTHON=1`` to force the
fallback.
"""
import os

from ettd import _pykernels

if os.environ.get("ETTD_PURE_PYTHON"):
    _impl = _pykernels
else:
    try:
        from ettd import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

levenshtein = _impl.levenshtein
cg_poisson = _impl.cg_poisson


def available_backends():
    """Map backend name to module for every backend importable here."""
    found = {"python": _pykernels}
    try:
        from ettd import _ckernels
    except ImportError:
        pass
    else:
        found["cython"] = _ckernels
    return found
