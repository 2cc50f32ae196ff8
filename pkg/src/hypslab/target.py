"""Target surfaces in a conformal disk chart and analytic harmonic maps into them.

A target is described by a conformal factor ``rho`` on the unit disk, with
metric ``rho(w)^2 |dw|^2``. Everything else follows from ``log rho``:

    L(w)     = d/dw log rho            (Christoffel coefficient of the chart)
    kappa(w) = -(4 / rho^2) d/dw d/dwbar log rho

and the complex structure acts on chart vectors as multiplication by ``i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from hypslab import _backend
from hypslab.hgeom import ConfigurationError, HyperbolicGrid, gradient

_FD_STEP = 1e-5


@dataclass(frozen=True)
class TargetSurface:
    """Conformal disk chart of a surface.

    ``log_rho`` maps a complex array to the real array ``log rho(w)``.
    The built-in Poincare target overrides the derivatives with closed forms.
    """

    log_rho: Callable[[np.ndarray], np.ndarray]
    name: str = "custom"
    theorem_mode: bool = False
    _christoffel: Callable | None = field(default=None, repr=False)
    _curvature: Callable | None = field(default=None, repr=False)

    def rho(self, w):
        return np.exp(self.log_rho(np.asarray(w)))

    def rho2(self, w):
        return np.exp(2.0 * self.log_rho(np.asarray(w)))

    def christoffel(self, w):
        """``L(w) = d/dw log rho``; the chart geodesic equation is ``w'' + 2 L w'^2 = 0``."""
        w = np.asarray(w, dtype=np.complex128)
        if self._christoffel is not None:
            return self._christoffel(w)
        h = _FD_STEP
        dx = (self.log_rho(w + h) - self.log_rho(w - h)) / (2 * h)
        dy = (self.log_rho(w + 1j * h) - self.log_rho(w - 1j * h)) / (2 * h)
        return 0.5 * (dx - 1j * dy)

    def gauss_curvature(self, w):
        w = np.asarray(w, dtype=np.complex128)
        if self._curvature is not None:
            return self._curvature(w)
        h = 1e-4
        lap = (self.log_rho(w + h) + self.log_rho(w - h) + self.log_rho(w + 1j * h)
               + self.log_rho(w - 1j * h) - 4 * self.log_rho(w)) / h**2
        return -lap / self.rho2(w)

    def check_curvature(self, samples: np.ndarray) -> None:
        if self.theorem_mode and np.any(self.gauss_curvature(samples) > 1e-12):
            raise ConfigurationError(
                f"target {self.name!r} has positive curvature on the image")


def poincare_disk_target(scale: float = 1.0, theorem_mode: bool = True) -> TargetSurface:
    """Poincare disk ``rho = 2 scale / (1 - |w|^2)``, curvature ``-1/scale^2``."""
    if not scale > 0:
        raise ConfigurationError("target scale must be positive")
    c = float(scale)
    return TargetSurface(
        log_rho=lambda w: math.log(2 * c) - np.log1p(-np.abs(w) ** 2),
        name="poincare" if c == 1.0 else f"poincare(scale={c:g})",
        theorem_mode=theorem_mode,
        _christoffel=lambda w: np.conj(w) / (1 - np.abs(w) ** 2),
        _curvature=lambda w: np.full(np.shape(w), -1.0 / c**2),
    )


def chart_distance_from_origin(w) -> np.ndarray:
    """Hyperbolic distance of a Poincare chart point from 0."""
    a = np.abs(w)
    return np.log((1 + a) / (1 - a))


@dataclass
class MapField:
    """A map into the target, stored as chart values ``w`` plus the chart
    values ``boundary`` it takes on the circle ``r = rmax``."""

    grid: HyperbolicGrid
    w: np.ndarray
    boundary: np.ndarray
    margin: float = 0.02

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.complex128)
        self.boundary = np.broadcast_to(
            np.asarray(self.boundary, dtype=np.complex128), (self.grid.ntheta,)).copy()
        self.grid.check(self.w)
        self.validate()

    def validate(self) -> None:
        if not np.all(np.isfinite(self.w)):
            raise FloatingPointError("map field has non-finite values")
        m = max(float(np.max(np.abs(self.w))), float(np.max(np.abs(self.boundary))))
        if m > 1 - self.margin:
            raise ValueError(
                f"map image leaves the chart margin: sup|w| = {m:.6g} > {1 - self.margin:.6g}")

    def with_values(self, w: np.ndarray) -> "MapField":
        return MapField(self.grid, w, self.boundary, self.margin)


@dataclass(frozen=True)
class AnalyticMapSpec:
    """``z -> sum_k coefficients[k] z^k`` (or its conjugate when antiholomorphic)."""

    kind: str
    coefficients: tuple

    def __post_init__(self):
        if self.kind not in ("holomorphic", "antiholomorphic"):
            raise ConfigurationError(f"map kind must be holomorphic or antiholomorphic, got {self.kind!r}")
        if not 1 <= len(self.coefficients) <= 9:
            raise ConfigurationError("map polynomial must have degree <= 8")

    def evaluate(self, z):
        c = np.asarray(self.coefficients, dtype=np.complex128)
        val = np.polyval(c[::-1], z)
        return np.conj(val) if self.kind == "antiholomorphic" else val

    def derivative(self, z):
        """Complex derivative of the underlying polynomial."""
        c = np.asarray(self.coefficients, dtype=np.complex128)
        if len(c) == 1:
            return np.zeros_like(np.asarray(z, dtype=np.complex128))
        dc = c[1:] * np.arange(1, len(c))
        return np.polyval(dc[::-1], z)

    def boundary_sup(self, samples: int = 4096) -> float:
        z = np.exp(2j * np.pi * np.arange(samples) / samples)
        return float(np.max(np.abs(self.evaluate(z))))

    @property
    def is_constant(self) -> bool:
        return all(abs(c) == 0 for c in self.coefficients[1:])


def make_spec(kind: str, coefficients: Sequence) -> AnalyticMapSpec:
    return AnalyticMapSpec(kind, tuple(complex(c) for c in coefficients))


def holomorphic_map(spec: AnalyticMapSpec, grid: HyperbolicGrid, margin: float = 0.02) -> MapField:
    """Sample the analytic map on the grid via the Poincare chart of the domain."""
    sup = spec.boundary_sup()
    if sup > 1 - margin:
        raise ValueError(f"analytic map image not compact in the chart: boundary sup {sup:.6g}")
    zb = math.tanh(grid.rmax / 2) * np.exp(1j * grid.theta)
    return MapField(grid, spec.evaluate(grid.disk_z), spec.evaluate(zb), margin)


def constant_map(grid: HyperbolicGrid, value: complex = 0.0) -> MapField:
    return MapField(grid, np.full(grid.shape, complex(value)), complex(value))


def _as_arrays(u):
    if isinstance(u, MapField):
        return u.grid, u.w, u.boundary
    raise TypeError("expected a MapField")


def tension_field(u: MapField, target: TargetSurface, form: str = "pointwise") -> np.ndarray:
    """Tension of ``u`` as a chart vector per node.

    ``form="pointwise"`` evaluates ``Delta u + 2 L(u) (grad u . grad u)`` with
    the sup-norm second-order stencil of ``laplace_beltrami_pointwise``.
    ``form="variational"`` returns minus the gradient, in the target-metric
    pairing ``sum vol rho(u)^2 Re(a conj b)``, of the face energy used by
    ``dirichlet_energy``; the flows use this one.
    """
    g, w, b = _as_arrays(u)
    if form == "variational":
        return tension_arrays(g, target, w, b)
    if form != "pointwise":
        raise ValueError(f"unknown tension form {form!r}")
    from hypslab.hgeom import laplace_beltrami_pointwise

    dw = gradient(g, w, boundary=b)
    return laplace_beltrami_pointwise(g, w, b) + 2 * target.christoffel(w) * (dw[0] ** 2 + dw[1] ** 2)


def tension_arrays(g: HyperbolicGrid, target: TargetSurface, w, b) -> np.ndarray:
    rho2 = target.rho2(w)
    rho2_b = target.rho2(b)
    lbar = np.conj(target.christoffel(w))
    return _backend.tension(w, b, rho2, rho2_b, lbar, g.cr, g.cb, g.ct, g.vol)


def energy_arrays(g: HyperbolicGrid, target: TargetSurface, w, b) -> float:
    rho2 = target.rho2(w)
    rho2_b = target.rho2(b)
    d = w[1:] - w[:-1]
    e_r = np.sum(g.cr[:, None] * 0.5 * (rho2[1:] + rho2[:-1]) * np.abs(d) ** 2, axis=1)
    db = b - w[-1]
    e_b = np.sum(g.cb * 0.5 * (rho2[-1] + rho2_b) * np.abs(db) ** 2)
    dt = np.roll(w, -1, axis=1) - w
    rt = 0.5 * (np.roll(rho2, -1, axis=1) + rho2)
    e_t = np.sum(g.ct[:, None] * rt * np.abs(dt) ** 2, axis=1)
    return 0.5 * (float(np.sum(e_r)) + float(e_b) + float(np.sum(e_t)))


def dirichlet_energy(u: MapField, target: TargetSurface) -> float:
    """``int (1/2)|du|^2 dvol`` as a sum over grid faces, including the
    half-cell face to the boundary circle."""
    g, w, b = _as_arrays(u)
    return energy_arrays(g, target, w, b)


def metric_inner(g: HyperbolicGrid, target: TargetSurface, w, a, b) -> float:
    """Target-metric L2 pairing of two chart vector fields along the map ``w``."""
    return float(np.sum(np.sum(target.rho2(w) * np.real(a * np.conj(b)), axis=1) * g.vol))


def energy_density(u: MapField, target: TargetSurface) -> np.ndarray:
    """``|du|^2`` from centered differences (metric Hilbert-Schmidt norm)."""
    g, w, b = _as_arrays(u)
    dw = gradient(g, w, boundary=b)
    return target.rho2(w) * np.sum(np.abs(dw) ** 2, axis=0)


def _iterated_derivatives(g, f, order, b):
    """All ``order``-fold compositions of the orthonormal derivatives, as a list."""
    from hypslab.hgeom import d_r, d_theta

    level = [f]
    for k in range(order):
        nxt = []
        for h in level:
            bnd = b if k == 0 else None
            nxt.append(d_r(g, h, 1, bnd))
            nxt.append(d_theta(g, h) / g.sinh_r[:, None])
        level = nxt
    return level


def verify_admissible(Q: MapField, target: TargetSurface, threshold: float = 10.0,
                      interior: int = 2) -> dict:
    """Decay and regularity quantities of a candidate limit map.

    Returns sup norms of the first three derivative tensors of ``Q`` and of
    ``e^r |dQ|``; ``passed`` compares the latter with ``threshold``. The
    outermost ``interior`` rings are excluded from the sups.
    """
    g, w, b = _as_arrays(Q)
    rho = target.rho(w)
    sl = slice(0, g.nr - interior)
    out = {}
    for j in (1, 2, 3):
        parts = _iterated_derivatives(g, w, j, b)
        mag = rho * np.sqrt(sum(np.abs(p) ** 2 for p in parts))
        out[f"grad{j}_sup"] = float(np.max(mag[sl]))
    dq = np.sqrt(energy_density(Q, target))
    weighted = np.exp(g.R) * dq
    out["er_dQ_sup"] = float(np.max(weighted[sl]))
    out["threshold"] = threshold
    out["passed"] = bool(np.isfinite(out["er_dQ_sup"]) and out["er_dQ_sup"] <= threshold)
    return out


def _fit_slope(x, y):
    if len(x) < 3:
        raise ValueError("degenerate fit window")
    return float(np.polyfit(x, y, 1)[0])


def decay_profile(Q: MapField, target: TargetSurface, window=None) -> dict:
    """Fitted exponential rates of the limit-frame fields of ``Q``.

    For each of ``|phi_inf|``, ``|A_inf|``, the full covariant derivative
    ``|nabla A_inf|`` and the curl ``|dA_inf|`` the max over angle is fitted
    as ``log y ~ slope * r`` on ``window`` (default ``[rmax/3, 2 rmax/3]``).
    """
    from hypslab.caloric import limit_frame
    from hypslab.hgeom import curl, d_r, d_theta

    g = Q.grid
    lo, hi = window if window is not None else (g.rmax / 3, 2 * g.rmax / 3)
    mask = (g.r >= lo) & (g.r <= hi)
    if mask.sum() < 3:
        raise ValueError("degenerate fit window")
    lf = limit_frame(Q, target)
    A, phi = lf.A, lf.phi
    s = g.sinh_r[:, None]
    coth = (np.cosh(g.r) / g.sinh_r)[:, None]
    nabla = [d_r(g, A[0], -1), d_r(g, A[1], -1),
             d_theta(g, A[0]) / s - coth * A[1], d_theta(g, A[1]) / s + coth * A[0]]
    fields = {
        "phi": np.sqrt(np.sum(np.abs(phi) ** 2, axis=0)),
        "A": np.sqrt(np.sum(A**2, axis=0)),
        "nablaA": np.sqrt(sum(c**2 for c in nabla)),
        "dA": np.abs(curl(g, A)),
    }
    report = {"window": (lo, hi)}
    for key, val in fields.items():
        prof = np.max(val, axis=1)[mask]
        if np.all(prof == 0):
            report[key] = "trivial"
            continue
        report[key] = _fit_slope(g.r[mask], np.log(prof))
    report["trivial"] = all(report[k] == "trivial" for k in fields)
    return report
