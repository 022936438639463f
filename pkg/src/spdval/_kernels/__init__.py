"""Hot numerical kernels with a compiled backend and a numpy fallback.

The compiled extension is preferred; set ``SPDVAL_PURE_PYTHON=1`` to force
the fallback. ``BACKEND`` names the active implementation.
"""

import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

if _ckernels is not None and os.environ.get("SPDVAL_PURE_PYTHON", "") not in ("1", "true", "yes"):
    _active = _ckernels
    BACKEND = "cython"
else:
    _active = _pykernels
    BACKEND = "python"

ppoly_eval = _active.ppoly_eval
ppoly_inverse = _active.ppoly_inverse
gauss_kde = _active.gauss_kde

__all__ = ["BACKEND", "ppoly_eval", "ppoly_inverse", "gauss_kde"]
