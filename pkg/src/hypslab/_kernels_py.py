"""Pure-numpy stencil kernels (fallback when the compiled extension is absent).

Both kernels act on radius-major ``(nr, ntheta)`` arrays and use the
face-flux form of the polar Laplace-Beltrami operator:

    L f_a = (1 / vol_a) * sum_faces c_f (f_b - f_a)

``cr`` holds the nr-1 interior radial face coefficients, ``cb`` the outer
Dirichlet face coefficient, ``ct`` the angular face coefficient per ring.
The inner radial face at r = 0 has zero area and never contributes.
"""

import numpy as np


def laplacian(f, b, cr, cb, ct, vol):
    out = np.zeros_like(f)
    flux = cr[:, None] * (f[1:] - f[:-1])
    out[:-1] += flux
    out[1:] -= flux
    out[-1] += cb * (b - f[-1])
    tflux = ct[:, None] * (np.roll(f, -1, axis=1) - f)
    out += tflux - np.roll(tflux, 1, axis=1)
    return out / vol[:, None]


def tension(w, b, rho2, rho2_b, lbar, cr, cb, ct, vol):
    """Variational tension: minus the metric gradient of the face energy."""
    lin = np.zeros_like(w)
    sq = np.zeros(w.shape, dtype=np.float64)

    d = w[1:] - w[:-1]
    flux = cr[:, None] * 0.5 * (rho2[1:] + rho2[:-1]) * d
    e = cr[:, None] * (d.real**2 + d.imag**2)
    lin[:-1] += flux
    lin[1:] -= flux
    sq[:-1] += e
    sq[1:] += e

    db = b - w[-1]
    lin[-1] += cb * 0.5 * (rho2[-1] + rho2_b) * db
    sq[-1] += cb * (db.real**2 + db.imag**2)

    dt = np.roll(w, -1, axis=1) - w
    rt = 0.5 * (np.roll(rho2, -1, axis=1) + rho2)
    tflux = ct[:, None] * rt * dt
    te = ct[:, None] * (dt.real**2 + dt.imag**2)
    lin += tflux - np.roll(tflux, 1, axis=1)
    sq += te + np.roll(te, 1, axis=1)

    v = vol[:, None]
    return lin / (rho2 * v) - lbar * sq / v
