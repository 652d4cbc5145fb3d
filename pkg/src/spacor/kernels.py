"""Kernel backend selection.

The compiled extension is used when it was built; otherwise the numpy
fallback is imported. Setting ``SPACOR_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _fallback

BACKEND = "python"

if os.environ.get("SPACOR_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _fallback
    else:
        BACKEND = "cython"
else:
    _impl = _fallback

chip_correlations = _impl.chip_correlations
ml_search = _impl.ml_search
mi_terms = _impl.mi_terms


def backend(name: str):
    """Return the kernel module for ``"python"`` or ``"cython"``.

    Raises ImportError when the compiled module is unavailable.
    """
    if name == "python":
        return _fallback
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")


__all__ = ["BACKEND", "backend", "chip_correlations", "ml_search", "mi_terms"]
