"""Radial harmonic analysis on the hyperbolic plane.

Spherical functions ``psi_lam(r)`` (eigenfunctions of the Laplacian with
eigenvalue ``-(lam^2 + 1/4)``, ``psi_lam(0) = 1``), the Harish-Chandra
c-function and series, the radial (spherical) transform with its Plancherel
measure, and frequency-localized Schrodinger kernels.

Normalizations, all fixed once:

* ``psi_lam(r) = 1/(sqrt(2) pi) int_{-r}^{r} exp(-i lam s) (cosh r - cosh s)^(-1/2) ds``
* ``c(lam) = Gamma(i lam) / (sqrt(pi) Gamma(i lam + 1/2))``, so ``|c|^-2 = pi lam tanh(pi lam)``
* ``Phi_lam(r) = (2 sinh r)^(-1/2) exp(i lam r) sum_j Gamma_j(lam) exp(-2 j r)``
* ``f(r) = C_P int_0^inf fhat(lam) psi_lam(r) |c(lam)|^-2 dlam`` with ``C_P = 1/(2 pi^2)``
  and ``fhat(lam) = int f psi_lam dvol``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy.special import loggamma

__all__ = [
    "PHI_CONST", "PLANCHEREL_CONST", "QuadratureError", "BudgetError",
    "spherical_function", "spherical_table", "ode_residual", "c_function",
    "plancherel_density", "hc_gamma", "hc_expansion", "calibrate_phi_constant",
    "SpectralTable", "spectral_table", "RadialProfile", "RadialTransform",
    "free_propagator_radial", "smooth_step", "chi_low", "chi_high", "KernelTable",
    "build_kernel", "heat_kernel_bound_check", "HeatBoundReport", "fit_loglog",
    "midpoint_radii",
]

PHI_CONST = 1.0 / math.sqrt(2.0)
PLANCHEREL_CONST = 1.0 / (2.0 * math.pi**2)
_MEHLER = 1.0 / (math.sqrt(2.0) * math.pi)
_U_MAX = 45.0  # tanh-sinh truncation: weights below exp(-45)
_HC_RMIN = 1.0
_LAM_SMALL = 0.05


class QuadratureError(RuntimeError):
    pass


class BudgetError(RuntimeError):
    pass


def _ts_nodes(r: float, h: float):
    """Tanh-sinh nodes on ``(-r, r)`` for the Mehler integrand, folded to
    ``s >= 0``. Returns nodes and weights that already include the
    ``(cosh r - cosh s)^(-1/2)`` factor and the normalization."""
    tmax = math.asinh(2 * _U_MAX / math.pi)
    k = np.arange(0, int(math.ceil(tmax / h)) + 1)
    t = k * h
    u = 0.5 * math.pi * np.sinh(t)
    cu = np.cosh(u)
    # r - s and r + s without cancellation
    rm = r * np.exp(-u) / cu
    rp = r * np.exp(u) / cu
    s = r * np.tanh(u)
    diff = 2.0 * np.sinh(0.5 * rp) * np.sinh(0.5 * rm)
    w = h * r * 0.5 * math.pi * np.cosh(t) / cu**2 / np.sqrt(diff)
    w[1:] *= 2.0  # symmetric pair +-s, cos is even
    return s, _MEHLER * w


def _ts_cos(lam: np.ndarray, r: float, tol: float, max_level: int = 14) -> np.ndarray:
    h = 0.5
    lam_max = float(np.max(lam)) if lam.size else 0.0
    # start fine enough that the central node spacing resolves cos(lam s)
    while h * r * 0.5 * math.pi * max(lam_max, 1.0) > 0.5 and h > 2.0**-max_level:
        h *= 0.5
    # choose the level on a sparse probe set, then evaluate everything once
    probe = np.unique(np.concatenate([lam[:: max(1, lam.size // 64)], [lam_max]]))
    prev = None
    for _ in range(max_level):
        s, w = _ts_nodes(r, h)
        val = np.cos(np.multiply.outer(probe, s)) @ w
        if prev is not None and np.max(np.abs(val - prev)) <= tol:
            break
        prev = val
        h *= 0.5
    else:
        raise QuadratureError(f"tanh-sinh did not converge at r={r}")
    out = np.empty(lam.shape)
    for sl in _chunks(lam.size, max(1, 4_000_000 // s.size)):
        out[sl] = np.cos(np.multiply.outer(lam[sl], s)) @ w
    return out


def spherical_function(lam, r, tol: float = 1e-15):
    """``psi_lam(r)`` by tanh-sinh quadrature of the Mehler integral.

    ``lam`` may be an array (evaluated at one ``r``); ``psi_lam(0) = 1`` exactly.
    """
    scalar = np.ndim(lam) == 0
    lam = np.abs(np.atleast_1d(np.asarray(lam, dtype=float)))
    r = float(r)
    if r < 0:
        raise ValueError("r must be nonnegative")
    if r == 0.0:
        out = np.ones_like(lam)
    else:
        if np.max(lam) * r > 1e4:
            raise QuadratureError("lam * r beyond the supported range")
        out = _ts_cos(lam, r, tol)
    return float(out[0]) if scalar else out


def ode_residual(lam: float, r: float, h: float = 0.02) -> float:
    """``psi'' + coth r psi' + (lam^2 + 1/4) psi`` with sixth-order differences."""
    off = np.arange(-3, 4)
    vals = np.array([spherical_function(lam, r + k * h) for k in off])
    d1 = np.dot([-1, 9, -45, 0, 45, -9, 1], vals) / (60 * h)
    d2 = np.dot([2, -27, 270, -490, 270, -27, 2], vals) / (180 * h * h)
    return float(d2 + d1 / math.tanh(r) + (lam * lam + 0.25) * vals[3])


def c_function(lam):
    """Harish-Chandra c-function; pole at ``lam = 0``."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam == 0):
        raise ZeroDivisionError("c(lam) has a pole at lam = 0")
    z = 1j * lam
    return np.exp(loggamma(z) - loggamma(z + 0.5)) / math.sqrt(math.pi)


def plancherel_density(lam):
    """``|c(lam)|^-2 = pi lam tanh(pi lam)``, even, with limit 0 at ``lam = 0``."""
    lam = np.asarray(lam, dtype=float)
    return math.pi * lam * np.tanh(math.pi * lam)


def hc_gamma(lam, J: int) -> np.ndarray:
    """Series coefficients ``Gamma_0..Gamma_J`` (last axis) of ``Phi_lam``."""
    lam = np.asarray(lam, dtype=float)
    out = np.zeros(lam.shape + (J + 1,), dtype=np.complex128)
    out[..., 0] = 1.0
    for j in range(1, J + 1):
        acc = np.zeros(lam.shape, dtype=np.complex128)
        for l in range(j):
            acc += (j - l) * out[..., l]
        out[..., j] = -acc / (4 * j * (j - 1j * lam))
    return out


def _phi(lam, r, J, const):
    g = hc_gamma(lam, J)
    r = np.asarray(r, dtype=float)
    e = np.exp(-2.0 * np.multiply.outer(r, np.arange(J + 1)))
    series = np.einsum("...j,rj->...r", g, e) if r.ndim else g @ e
    lam_ = np.asarray(lam, dtype=float)[..., None] if r.ndim else lam
    return const * np.sinh(r) ** -0.5 * np.exp(1j * np.multiply(lam_, r)) * series


def hc_expansion(lam, r, J: int = 25, r_min: float = _HC_RMIN, const: float = PHI_CONST):
    """``c(lam) Phi_lam(r) + c(-lam) Phi_-lam(r)``, truncated after ``J`` terms.

    ``lam`` is a scalar or array, ``r`` a scalar or array; the result has shape
    ``lam.shape + r.shape``.
    """
    if np.min(r) < r_min:
        raise ValueError(f"series needs r >= {r_min}")
    lam = np.asarray(lam, dtype=float)
    c = c_function(lam)
    if np.ndim(r):
        c = c[..., None]
    val = c * _phi(lam, r, J, const)
    return 2.0 * val.real  # the two terms are complex conjugates


def calibrate_phi_constant(lam: float = 1.0, r: float = 5.0, J: int = 25) -> float:
    """Normalization of ``Phi`` that makes the series equal the integral at one point."""
    return spherical_function(lam, r) / float(hc_expansion(lam, r, J, const=1.0))


def spherical_table(lam, r, J: int = 25) -> np.ndarray:
    """``psi_lam(r)`` on the product grid, shape ``(len(lam), len(r))``.

    The series is used for ``r >= 1`` and ``lam >= 0.05``; quadrature elsewhere.
    """
    lam = np.abs(np.atleast_1d(np.asarray(lam, dtype=float)))
    r = np.atleast_1d(np.asarray(r, dtype=float))
    out = np.empty((lam.size, r.size))
    big = lam >= _LAM_SMALL
    far = r >= _HC_RMIN
    if np.any(big) and np.any(far):
        out[np.ix_(big, far)] = hc_expansion(lam[big], r[far], J)
    for j in np.nonzero(~far)[0]:
        out[:, j] = spherical_function(lam, r[j])
    if np.any(~big):
        for j in np.nonzero(far)[0]:
            out[~big, j] = spherical_function(lam[~big], r[j])
    return out


@dataclass
class SpectralTable:
    lam: np.ndarray
    density: np.ndarray
    gammas: np.ndarray  # (len(lam), J+1)
    phi_const: float = PHI_CONST
    plancherel_const: float = PLANCHEREL_CONST


def spectral_table(lam, J: int = 25) -> SpectralTable:
    lam = np.asarray(lam, dtype=float)
    return SpectralTable(lam, plancherel_density(lam), hc_gamma(lam, J))


@dataclass
class RadialProfile:
    r: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.values = np.asarray(self.values)
        if self.r.shape != self.values.shape:
            raise ValueError("radii and values must have the same shape")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("profile values must be finite")


def midpoint_radii(rmax: float, nr: int) -> np.ndarray:
    dr = rmax / nr
    return (np.arange(nr) + 0.5) * dr


class RadialTransform:
    """Spherical transform on midpoint radii.

    The forward transform is sampled at Chebyshev points of ``[0, lam_max]``
    and stored as a Chebyshev series, which the inverse evaluates on whatever
    lambda lattice the multiplier needs.
    """

    def __init__(self, r: np.ndarray, lam_max: float = 12.0, nlam: int = 160, J: int = 25):
        self.r = np.asarray(r, dtype=float)
        dr = np.diff(self.r)
        if self.r.size < 2 or not np.allclose(dr, dr[0]) or abs(self.r[0] - 0.5 * dr[0]) > 1e-12:
            raise ValueError("radial transform expects midpoint radii (i + 1/2) dr")
        self.dr = float(dr[0])
        self.lam_max = float(lam_max)
        self.J = J
        x = np.cos(np.pi * (np.arange(nlam) + 0.5) / nlam)
        self.lam_nodes = 0.5 * self.lam_max * (x + 1.0)
        self._psi_nodes = spherical_table(self.lam_nodes, self.r, J)
        self._w = 2 * math.pi * np.sinh(self.r) * self.dr
        gl_x, gl_w = np.polynomial.legendre.leggauss(4 * nlam)
        self.lam_q = 0.5 * self.lam_max * (gl_x + 1.0)
        self.w_q = 0.5 * self.lam_max * gl_w * plancherel_density(self.lam_q)

    def forward(self, f) -> np.ndarray:
        """Chebyshev coefficients of ``fhat`` on ``[0, lam_max]``."""
        vals = np.asarray(f.values if isinstance(f, RadialProfile) else f)
        fh = self._psi_nodes @ (vals * self._w)
        # midpoint-rule end correction at the pole: the integrand 2 pi f psi sinh r
        # has slope 2 pi f(0) there; f(0) from the even extrapolation of two rings
        f0 = (9 * vals[0] - vals[1]) / 8
        fh = fh - 2 * math.pi * self.dr**2 / 24 * f0
        return cheb.chebfit(2 * self.lam_nodes / self.lam_max - 1, fh, self.lam_nodes.size - 1)

    def evaluate(self, coef: np.ndarray, lam) -> np.ndarray:
        return cheb.chebval(2 * np.asarray(lam) / self.lam_max - 1, coef)

    def inverse(self, coef: np.ndarray, r=None, multiplier=None, dlam: float | None = None) -> np.ndarray:
        """``C_P int fhat m psi |c|^-2 dlam`` at radii ``r`` (default: own radii).

        Without ``dlam`` a Gauss-Legendre rule is used; ``dlam`` selects a
        composite Simpson lattice fine enough for an oscillating multiplier.
        """
        rr = self.r if r is None else np.atleast_1d(np.asarray(r, dtype=float))
        if dlam is None:
            lam, w = self.lam_q, self.w_q
        else:
            lam, w = _simpson(0.0, self.lam_max, dlam)
            w = w * plancherel_density(lam)
        fh = self.evaluate(coef, lam)
        if multiplier is not None:
            fh = fh * multiplier(lam)
        out = np.zeros(rr.size, dtype=np.result_type(fh, float))
        for sl in _chunks(lam.size, max(1, 2_000_000 // max(rr.size, 1))):
            out += PLANCHEREL_CONST * ((fh[sl] * w[sl]) @ spherical_table(lam[sl], rr, self.J))
        return out

    def l2_norm_sq(self, f) -> float:
        vals = np.abs(np.asarray(f.values if isinstance(f, RadialProfile) else f)) ** 2
        f0 = (9 * vals[0] - vals[1]) / 8
        return float(np.sum(vals * self._w) - 2 * math.pi * self.dr**2 / 24 * f0)

    def spectral_l2_norm_sq(self, coef) -> float:
        fh = self.evaluate(coef, self.lam_q)
        return float(PLANCHEREL_CONST * np.sum(np.abs(fh) ** 2 * self.w_q))


def _chunks(n, size):
    for a in range(0, n, size):
        yield slice(a, min(n, a + size))


def _simpson(a, b, dlam):
    n = max(2, int(math.ceil((b - a) / dlam)))
    n += n % 2
    lam = np.linspace(a, b, n + 1)
    w = np.ones(n + 1)
    w[1:-1:2] = 4
    w[2:-1:2] = 2
    return lam, w * (b - a) / (3 * n)


def free_propagator_radial(tr: RadialTransform, f, t: float, r=None, dlam=None) -> np.ndarray:
    """``exp(i t Delta) f`` for a radial profile: multiplier ``exp(-i t (lam^2 + 1/4))``."""
    coef = tr.forward(f)
    if t == 0:
        return tr.inverse(coef, r).astype(np.complex128)
    rr = tr.r if r is None else np.atleast_1d(r)
    if dlam is None:
        dlam = math.pi / (10 * (2 * tr.lam_max * abs(t) + float(np.max(rr))))
    return tr.inverse(coef, rr, lambda lam: np.exp(-1j * t * (lam**2 + 0.25)), dlam)


def smooth_step(x):
    """C-infinity step: 0 for ``x <= 0``, 1 for ``x >= 1``."""
    x = np.asarray(x, dtype=float)
    def bump(y):
        return np.where(y > 0, np.exp(-1.0 / np.where(y > 0, y, 1.0)), 0.0)
    a, b = bump(x), bump(1.0 - x)
    return a / (a + b)


def chi_low(lam):
    """Equals 1 for ``|lam| <= 2``, vanishes for ``|lam| >= 4``."""
    return 1.0 - smooth_step((np.abs(lam) - 2.0) / 2.0)


def chi_high(lam):
    return 1.0 - chi_low(lam)


@dataclass
class KernelTable:
    t: np.ndarray
    r: np.ndarray
    sigma: float
    band: str
    values: np.ndarray  # (len(t), len(r)) complex
    tail_bound: float
    nodes: int


def build_kernel(t, sigma: float, band: str, r, lam_max: float = 200.0, rolloff: float = 20.0,
                 max_nodes: int = 20_000_000) -> KernelTable:
    """``int chi(lam) (lam^2+1/4)^sigma |c|^-2 psi_lam(r) exp(i t (lam^2+1/4)) dlam``.

    The high band is rolled off smoothly over ``[lam_max - rolloff, lam_max]``;
    ``tail_bound`` is the integral of the modulus of the discarded amplitude
    estimated on the roll-off interval.
    """
    if band not in ("low", "high"):
        raise ValueError(f"unknown band {band!r}")
    if sigma not in (0, 0.0, 0.25):
        raise ValueError("sigma must be 0 or 1/4")
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    rr = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(ts < 1):
        raise ValueError("kernels are defined for t >= 1")
    top = 4.0 if band == "low" else lam_max
    vals = np.zeros((ts.size, rr.size), dtype=np.complex128)
    used = 0
    for i, tt in enumerate(ts):
        dlam = math.pi / (10 * (2 * top * tt + float(np.max(rr))))
        n = int(math.ceil(top / dlam))
        if n * rr.size > max_nodes:
            raise BudgetError(f"t={tt}: {n} lambda nodes exceed the quadrature budget")
        lam, w = _simpson(0.0, top, dlam)
        amp = plancherel_density(lam) * (lam**2 + 0.25) ** sigma
        if band == "low":
            amp = amp * chi_low(lam)
        else:
            amp = amp * chi_high(lam) * (1.0 - smooth_step((lam - (lam_max - rolloff)) / rolloff))
        amp = amp * np.exp(1j * tt * (lam**2 + 0.25)) * w
        for sl in _chunks(lam.size, max(1, 2_000_000 // rr.size)):
            vals[i] += amp[sl] @ spherical_table(lam[sl], rr)
        used = max(used, lam.size)
    tail = 0.0
    if band == "high":
        lt = np.linspace(lam_max - rolloff, lam_max, 201)
        tail = float(np.trapezoid(plancherel_density(lt) * (lt**2 + 0.25) ** sigma
                                  * smooth_step((lt - (lam_max - rolloff)) / rolloff), lt))
    return KernelTable(ts, rr, float(sigma), band, vals, tail, used)


def fit_loglog(x, y) -> float:
    x, y = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    return float(np.polyfit(x, y, 1)[0])


@dataclass
class HeatBoundReport:
    s: np.ndarray
    norms: np.ndarray
    constant: float
    short_slope: float
    long_rate: float


def heat_kernel_bound_check(tr: RadialTransform, f, alpha: float, s_samples) -> HeatBoundReport:
    """``||exp(s Delta) (-Delta)^alpha f||_{L2}`` via the spectral multiplier
    ``exp(-s(lam^2+1/4)) (lam^2+1/4)^alpha`` and Plancherel.

    ``constant`` is ``max norm * s^alpha * exp(s/4) / ||f||``.
    """
    s = np.asarray(s_samples, dtype=float)
    coef = tr.forward(f)
    fh = tr.evaluate(coef, tr.lam_q)
    mu = tr.lam_q**2 + 0.25
    norms = np.array([math.sqrt(PLANCHEREL_CONST * np.sum(
        np.abs(fh * np.exp(-ss * mu) * mu**alpha) ** 2 * tr.w_q)) for ss in s])
    f0 = math.sqrt(tr.l2_norm_sq(f))
    const = float(np.max(norms * s**alpha * np.exp(s / 4) / f0))
    short = s <= 0.1
    long = s >= 2.0
    slope = fit_loglog(s[short], norms[short]) if short.sum() >= 2 else float("nan")
    rate = -float(np.polyfit(s[long], np.log(norms[long]), 1)[0]) if long.sum() >= 2 else float("nan")
    return HeatBoundReport(s, norms, const, slope, rate)
