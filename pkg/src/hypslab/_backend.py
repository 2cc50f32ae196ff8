"""Select the stencil kernel implementation at import time.

The compiled Cython extension is used when it was built; otherwise the
numpy fallback. Setting ``HYPSLAB_PURE_PYTHON=1`` forces the fallback.
"""

import os

from hypslab import _kernels_py

NAME = "python"
kernels = _kernels_py

if os.environ.get("HYPSLAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from hypslab import _kernels_cy
    except ImportError:  # extension not built
        pass
    else:
        kernels = _kernels_cy
        NAME = "cython"


def laplacian(f, b, cr, cb, ct, vol):
    return kernels.laplacian(f, b, cr, cb, ct, vol)


def tension(w, b, rho2, rho2_b, lbar, cr, cb, ct, vol):
    return kernels.tension(w, b, rho2, rho2_b, lbar, cr, cb, ct, vol)
