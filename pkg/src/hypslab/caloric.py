"""Harmonic map heat flow and the caloric gauge built on top of it.

Frames are stored as angles: a unit target vector at chart point ``v`` is
``e = exp(i alpha) / rho(v)``, with ``J e = i e``. Frame components of a
chart vector ``V`` are ``rho(v) V exp(-i alpha)`` and the connection form is
``A_j = d_j alpha + 2 Im(L(v) d_j v)``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np

from hypslab import hgeom
from hypslab.hgeom import (HyperbolicGrid, ModalSolver, PointwiseModalSolver, d_r, d_theta,
                          gradient)
from hypslab.target import (MapField, TargetSurface, dirichlet_energy, energy_arrays,
                            tension_arrays, tension_field)

__all__ = [
    "HeatTrajectory", "Frame", "LimitFrame", "GaugeData", "HeatFlowError",
    "TransportError", "s_lattice", "run_heat_flow", "dirichlet_energy",
    "discrete_harmonic", "limit_frame", "transport_frames", "gauge_fields",
    "decompose_connection", "gauge_identities_check", "frame_components",
    "connection", "perturbed_map", "geodesic_distance", "SmoothingReport",
    "h2_norm", "tension_smoothing",
]


class HeatFlowError(RuntimeError):
    pass


class TransportError(RuntimeError):
    pass


# per-thread: concurrent LAPACK solves against one shared factorization corrupt the heap
_SOLVERS = threading.local()


_FORMS = ("pointwise", "variational")


def _check_form(form: str) -> None:
    if form not in _FORMS:
        raise ValueError(f"unknown tension form {form!r}")


def modal_solver(grid: HyperbolicGrid, form: str = "variational"):
    """Cached implicit solver for ``a x + b Delta_h x = y`` matching ``form``."""
    _check_form(form)
    cache = _SOLVERS.__dict__.setdefault("by_grid", {})
    key = (grid.nr, grid.ntheta, grid.rmax, form)
    if key not in cache:
        if len(cache) > 8:
            cache.clear()
        cls = ModalSolver if form == "variational" else PointwiseModalSolver
        cache[key] = cls(grid)
    return cache[key]


def _laplacian(g, w, b, form):
    if form == "variational":
        return hgeom.laplace_beltrami(g, w, b)
    return hgeom.laplace_beltrami_pointwise(g, w, b)


def discrete_tension(g, target, w, b, form: str = "pointwise"):
    if form == "variational":
        return tension_arrays(g, target, w, b)
    return tension_field(MapField(g, w, b, margin=0.0), target, form="pointwise")


def remainder(g, target, w, b, form: str = "variational"):
    """Nonlinear part of the tension: ``tau_h(w) - Delta_h w``."""
    return discrete_tension(g, target, w, b, form) - _laplacian(g, w, b, form)


def geodesic_distance(grid: HyperbolicGrid, r0: float, theta0: float) -> np.ndarray:
    ch = (np.cosh(grid.R) * math.cosh(r0)
          - np.sinh(grid.R) * math.sinh(r0) * np.cos(grid.TH - theta0))
    return np.arccosh(np.maximum(ch, 1.0))


def perturbed_map(Q: MapField, epsilon: float, center_r: float = 0.0,
                  center_theta: float = 0.0, width: float = 1.0,
                  component: complex = 1.0) -> MapField:
    """``Q + epsilon * component * exp(-(d / width)^2)`` with ``d`` the geodesic
    distance to the bump center. Boundary values are left unchanged."""
    d = geodesic_distance(Q.grid, center_r, center_theta)
    bump = complex(component) * np.exp(-(d / width) ** 2)
    return Q.with_values(Q.w + epsilon * bump)


def discrete_harmonic(Q: MapField, target: TargetSurface, tol: float = 1e-12,
                      max_iter: int = 200, form: str = "pointwise") -> MapField:
    """Relax ``Q`` to the nearby zero of the discrete tension with the same
    boundary values (Picard iteration ``Delta_h w_new = -R(w_old)``)."""
    g = Q.grid
    solver = modal_solver(g, form)
    w = Q.w.copy()
    b = Q.boundary
    prev = math.inf
    for _ in range(max_iter):
        res = float(np.max(np.abs(discrete_tension(g, target, w, b, form))))
        if res <= tol or res >= prev:
            break
        prev = res
        w = solver.solve(-remainder(g, target, w, b, form), 0.0, 1.0, boundary=b)
    return Q.with_values(w)


def s_lattice(ds0: float, smax: float, growth: float = 1.2, ds_cap: float = 0.25) -> np.ndarray:
    """``0 = s_0 < s_1 < ... = smax`` with ``ds_{k+1} = min(growth ds_k, ds_cap)``."""
    if not (ds0 > 0 and smax > 0 and growth >= 1):
        raise ValueError("invalid s-lattice parameters")
    s = [0.0]
    ds = ds0
    while s[-1] < smax - 1e-12:
        s.append(min(s[-1] + ds, smax))
        ds = min(ds * growth, ds_cap)
    return np.array(s)


_ARS_GAMMA = 1.0 - 1.0 / math.sqrt(2.0)
_ARS_DELTA = 1.0 - 1.0 / (2.0 * _ARS_GAMMA)


def _heat_step(solver, g, target, x, b, h, scheme, form):
    if scheme == "euler":
        return solver.solve(x + h * remainder(g, target, x, b, form), 1.0, -h, boundary=b)
    gam, dl = _ARS_GAMMA, _ARS_DELTA
    r0 = remainder(g, target, x, b, form)
    y2 = solver.solve(x + gam * h * r0, 1.0, -gam * h, boundary=b)
    rhs = x + h * (dl * r0 + (1 - dl) * remainder(g, target, y2, b, form)
                   + (1 - gam) * _laplacian(g, y2, b, form))
    return solver.solve(rhs, 1.0, -gam * h, boundary=b)


@dataclass
class HeatTrajectory:
    grid: HyperbolicGrid
    target: TargetSurface
    s: np.ndarray
    v: np.ndarray  # (K+1, nr, ntheta) chart values
    boundary: np.ndarray
    energy: np.ndarray
    substeps: np.ndarray
    margin: float = 0.02
    form: str = "pointwise"
    persistent_rise: float = 0.0  # largest step-independent relative energy rise

    def level(self, k: int) -> MapField:
        return MapField(self.grid, self.v[k], self.boundary, self.margin)


def run_heat_flow(u0: MapField, target: TargetSurface, smax: float = 20.0,
                  ds0: float | None = None, growth: float = 1.2, ds_cap: float = 0.25,
                  energy_tol: float = 1e-8, max_halvings: int = 12,
                  scheme: str = "ars222", form: str = "pointwise") -> HeatTrajectory:
    """Semi-implicit heat flow ``d_s v = tau(v)``: implicit Laplacian, explicit
    nonlinear remainder. An interval whose energy rises by more than
    ``energy_tol`` (relative) is redone with twice as many substeps.

    ``scheme="ars222"`` is the second-order L-stable IMEX Runge-Kutta pair of
    Ascher, Ruuth and Spiteri; ``"euler"`` is first-order IMEX Euler.
    ``form`` picks the discrete tension: ``"pointwise"`` (second order in sup
    norm up to the pole) or ``"variational"`` (exact gradient of the face energy).
    """
    if scheme not in ("ars222", "euler"):
        raise ValueError(f"unknown heat-flow scheme {scheme!r}")
    _check_form(form)
    g = u0.grid
    if ds0 is None:
        ds0 = min(g.dr**2, 1e-3)
    s = s_lattice(ds0, smax, growth, ds_cap)
    solver = modal_solver(g, form)
    b = u0.boundary
    v = np.empty((len(s),) + g.shape, dtype=np.complex128)
    v[0] = u0.w
    energy = np.empty(len(s))
    energy[0] = energy_arrays(g, target, u0.w, b)
    subs = np.ones(len(s), dtype=int)
    # absolute floor so that rounding on a (near) constant map is not a rise
    scale = max(energy[0], 1e-12)
    w = u0.w
    persistent = 0.0
    for k in range(1, len(s)):
        ds = s[k] - s[k - 1]
        n = 1
        rise_prev = None
        for _ in range(max_halvings + 1):
            h = ds / n
            x = w
            for _ in range(n):
                x = _heat_step(solver, g, target, x, b, h, scheme, form)
            e = energy_arrays(g, target, x, b)
            finite = bool(np.all(np.isfinite(x)))
            rise = e - energy[k - 1]
            if finite and rise <= energy_tol * scale:
                break
            # the pointwise tension is not an exact energy gradient, so near the
            # limit the face energy may rise by a step-independent amount; only
            # a rise that shrinks under halving signals an unstable step
            if (finite and form == "pointwise" and rise_prev is not None
                    and abs(rise - rise_prev) <= 0.1 * rise_prev):
                persistent = max(persistent, rise / scale)
                break
            rise_prev = rise if finite else None
            n *= 2
        else:
            raise HeatFlowError(f"energy increase at s={s[k]:.4g} after {max_halvings} halvings")
        m = float(np.max(np.abs(x)))
        if m > 1 - u0.margin:
            raise HeatFlowError(f"heat flow left the chart margin at s={s[k]:.4g}")
        v[k] = x
        energy[k] = e
        subs[k] = n
        w = x
    return HeatTrajectory(g, target, s, v, b.copy(), energy, subs, u0.margin, form, persistent)


@dataclass
class Frame:
    """Unit frame ``e = exp(i alpha) / rho(v)`` along the chart map ``v``."""

    alpha: np.ndarray
    v: np.ndarray

    def vector(self, target: TargetSurface) -> np.ndarray:
        return np.exp(1j * self.alpha) / target.rho(self.v)


def frame_components(target: TargetSurface, v, alpha, V):
    """Complex frame components of the chart vector(s) ``V`` at ``v``."""
    return target.rho(v) * V * np.exp(-1j * alpha)


def connection(grid: HyperbolicGrid, target: TargetSurface, v, alpha, boundary=None,
               dv=None) -> np.ndarray:
    """``A_j = d_j alpha + 2 Im(L(v) d_j v)`` in orthonormal components."""
    if dv is None:
        dv = gradient(grid, v, boundary=boundary)
    dalpha = gradient(grid, alpha)
    return dalpha + 2 * np.imag(target.christoffel(v) * dv)


@dataclass
class LimitFrame:
    frame: Frame
    A: np.ndarray
    phi: np.ndarray
    kappa: np.ndarray


def limit_frame(Q: MapField, target: TargetSurface) -> LimitFrame:
    """Frame along the real chart axis at ``Q`` (``alpha = 0``) with its
    connection and the frame components of ``dQ``."""
    g = Q.grid
    alpha = np.zeros(g.shape)
    dq = gradient(g, Q.w, boundary=Q.boundary)
    A = connection(g, target, Q.w, alpha, dv=dq)
    phi = frame_components(target, Q.w, alpha, dq)
    return LimitFrame(Frame(alpha, Q.w.copy()), A, phi, target.gauss_curvature(Q.w))


_GL_X, _GL_W = np.polynomial.legendre.leggauss(6)


def chart_transport_angle(target: TargetSurface, w0, w1, alpha0) -> np.ndarray:
    """Parallel transport of the frame angle along the chart segment ``w0 -> w1``."""
    dw = w1 - w0
    acc = np.zeros(np.shape(w0))
    for x, wt in zip(_GL_X, _GL_W):
        tau = 0.5 * (x + 1)
        acc += 0.5 * wt * np.imag(target.christoffel(w0 + tau * dw) * dw)
    return alpha0 - 2 * acc


@dataclass
class TransportResult:
    alpha: np.ndarray  # (K+1, nr, ntheta)
    norm_deviation: np.ndarray  # per step, before renormalization


def transport_frames(traj: HeatTrajectory, frame_inf: Frame, Q: MapField | None = None,
                     step_tol: float = 1e-6, strict: bool = True) -> TransportResult:
    """Parallel transport of the limit frame backward along the heat flow.

    The frame at ``smax`` is the limit frame carried along the chart segment
    from ``Q`` to ``v(smax)``. Each backward step multiplies the frame by
    ``exp(2 L(v_mid) (v_{k+1} - v_k))``; the departure of its metric norm
    from 1 is recorded and then removed.
    """
    target = traj.target
    K = len(traj.s) - 1
    q = frame_inf.v if Q is None else Q.w
    alpha = np.empty((K + 1,) + traj.grid.shape)
    alpha[K] = chart_transport_angle(target, q, traj.v[K], frame_inf.alpha)
    dev = np.zeros(K)
    log_rho = target.log_rho
    for k in range(K - 1, -1, -1):
        dv = traj.v[k + 1] - traj.v[k]
        z = 2 * target.christoffel(0.5 * (traj.v[k + 1] + traj.v[k])) * dv
        alpha[k] = alpha[k + 1] + np.imag(z)
        # log of metric norm after the step: log|e_{k+1}| + Re z + log rho(v_k)
        lognorm = -log_rho(traj.v[k + 1]) + np.real(z) + log_rho(traj.v[k])
        dev[k] = float(np.max(np.abs(np.expm1(lognorm))))
        if strict and dev[k] > step_tol:
            raise TransportError(
                f"frame norm drift {dev[k]:.3e} at s={traj.s[k]:.4g} exceeds {step_tol:g}")
    return TransportResult(alpha, dev)


@dataclass
class GaugeData:
    grid: HyperbolicGrid
    s: np.ndarray
    phi: np.ndarray  # (K+1, 2, nr, nt) complex
    phi_s: np.ndarray  # (K+1, nr, nt) complex
    A: np.ndarray  # (K+1, 2, nr, nt) real, from the frames
    A_int: np.ndarray  # same, from the s-integral of the curvature term
    kappa: np.ndarray  # (K+1, nr, nt)
    A_inf: np.ndarray
    phi_inf: np.ndarray
    kappa_inf: np.ndarray
    alpha: np.ndarray
    tail_rate: float
    A_tilde: np.ndarray | None = None
    A_lin: np.ndarray | None = None
    A_qua: np.ndarray | None = None
    phi_tilde: np.ndarray | None = None
    extra: dict = field(default_factory=dict)


def _cumulative_from_top(s, f):
    """``int_{s_k}^{s_K} f ds`` by the trapezoid rule, for every level ``k``."""
    out = np.zeros_like(f)
    for k in range(len(s) - 2, -1, -1):
        out[k] = out[k + 1] + 0.5 * (s[k + 1] - s[k]) * (f[k + 1] + f[k])
    return out


def _cumulative_intervals(s, f):
    """``sum_{m >= k} f_m ds_m`` for interval densities ``f_m`` on ``[s_m, s_{m+1}]``."""
    ds = np.diff(s)
    out = np.zeros((len(s),) + f.shape[1:])
    for k in range(len(s) - 2, -1, -1):
        out[k] = out[k + 1] + ds[k] * f[k]
    return out


def _tail(s, f, decade: float = 10.0):
    """Exponential-tail estimate of ``int_{s_end}^inf f ds`` and the fitted rate.

    ``s`` holds the sample positions of ``f`` (levels or interval midpoints);
    the rate is fitted to the log of the sup norm over the last ``decade``.
    """
    mask = s >= s[-1] - decade
    mags = np.array([np.max(np.abs(f[k])) for k in np.nonzero(mask)[0]])
    good = mags > 0
    if good.sum() < 3:
        return np.zeros_like(f[-1]), 0.0
    slope = np.polyfit(s[mask][good], np.log(mags[good]), 1)[0]
    rate = -slope
    if not rate > 1e-3:
        return np.zeros_like(f[-1]), 0.0
    return f[-1] / rate, float(rate)


def gauge_fields(traj: HeatTrajectory, frames: TransportResult, lf: LimitFrame) -> GaugeData:
    """Frame components and connection at every s-level.

    The connection is also rebuilt from
    ``A = A_inf - int_s^inf kappa Im(phi_s conj(phi_j)) ds'`` in two ways:
    ``A_int`` integrates over the discrete path (interval midpoints, with
    ``phi_s`` taken from the actual increments of ``v``), which is second
    order whatever the stepping order of the flow; ``A_int_trap`` applies the
    trapezoid rule to the level values of ``phi_s`` from the tension, and
    inherits the first-order s-error of the semi-implicit flow.
    """
    g, target = traj.grid, traj.target
    K1 = len(traj.s)
    s = traj.s
    phi = np.empty((K1, 2) + g.shape, dtype=np.complex128)
    phi_s = np.empty((K1,) + g.shape, dtype=np.complex128)
    A = np.empty((K1, 2) + g.shape)
    kappa = np.empty((K1,) + g.shape)
    b = traj.boundary
    for k in range(K1):
        v, al = traj.v[k], frames.alpha[k]
        dv = gradient(g, v, boundary=b)
        phi[k] = frame_components(target, v, al, dv)
        phi_s[k] = frame_components(target, v, al, discrete_tension(g, target, v, b, traj.form))
        A[k] = connection(g, target, v, al, dv=dv)
        kappa[k] = target.gauss_curvature(v)
    integrand = kappa[:, None] * np.imag(phi_s[:, None] * np.conj(phi))
    tail, rate = _tail(s, integrand)
    A_trap = lf.A[None] - _cumulative_from_top(s, integrand) - tail[None]

    path = _path_quantities(traj, frames, phi)
    dens = path["kappa"][:, None] * np.imag(path["phi_s"][:, None] * np.conj(path["phi"]))
    ptail, prate = _tail(path["s"], dens)
    A_int = lf.A[None] - _cumulative_intervals(s, dens) - ptail[None]
    gd = GaugeData(g, s.copy(), phi, phi_s, A, A_int, kappa, lf.A, lf.phi,
                   lf.kappa, frames.alpha, prate)
    gd.extra["A_int_trap"] = A_trap
    gd.extra["trap_tail_rate"] = rate
    gd.extra["path"] = path
    return gd


def _path_quantities(traj, frames, phi):
    """Midpoint values on each s-interval, with ``phi_s`` from the increment."""
    target = traj.target
    ds = np.diff(traj.s)
    vm = 0.5 * (traj.v[1:] + traj.v[:-1])
    am = 0.5 * (frames.alpha[1:] + frames.alpha[:-1])
    vel = (traj.v[1:] - traj.v[:-1]) / ds[:, None, None]
    return {
        "s": 0.5 * (traj.s[1:] + traj.s[:-1]),
        "phi_s": frame_components(target, vm, am, vel),
        "phi": 0.5 * (phi[1:] + phi[:-1]),
        "kappa": target.gauss_curvature(vm),
    }


def decompose_connection(gd: GaugeData) -> GaugeData:
    """Split ``A - A_inf`` into the part linear in the perturbation and the rest.

    With ``phi~ = phi - phi_inf`` and ``kappa~ = kappa - kappa_inf``:

        A_lin = -kappa_inf int_s^inf Im(phi_s conj(phi_inf_j))
        A_qua = -int_s^inf [kappa~ Im(phi_s conj(phi_inf_j)) + kappa Im(phi_s conj(phi~_j))]

    evaluated with the same path quadrature as ``A_int``, so that
    ``A_lin + A_qua = A_int - A_inf`` holds to rounding and ``A~ = A - A_inf``
    (direct connection) differs from it by the quadrature error of ``A_int``.
    """
    s = gd.s
    path = gd.extra["path"]
    ps, pm, km = path["phi_s"], path["phi"], path["kappa"]
    phi_t = pm - gd.phi_inf[None]
    lin = gd.kappa_inf[None, None] * np.imag(ps[:, None] * np.conj(gd.phi_inf[None]))
    qua = ((km - gd.kappa_inf[None])[:, None] * np.imag(ps[:, None] * np.conj(gd.phi_inf[None]))
           + km[:, None] * np.imag(ps[:, None] * np.conj(phi_t)))
    lin_tail, _ = _tail(path["s"], lin)
    qua_tail, _ = _tail(path["s"], qua)
    gd.A_lin = -_cumulative_intervals(s, lin) - lin_tail[None]
    gd.A_qua = -_cumulative_intervals(s, qua) - qua_tail[None]
    gd.A_tilde = gd.A - gd.A_inf[None]
    gd.phi_tilde = gd.phi - gd.phi_inf[None]
    return gd


def covariant_divergence(grid, phi, A):
    """``D^j phi_j = div(phi) + i A^j phi_j`` for a complex 1-form in orthonormal components."""
    return hgeom.divergence(grid, phi) + 1j * (A[0] * phi[0] + A[1] * phi[1])


def torsion(grid, phi, A):
    """``D_1 phi_2 - D_2 phi_1`` (orthonormal, with the coframe rotation term)."""
    return hgeom.curl(grid, phi) + 1j * (A[0] * phi[1] - A[1] * phi[0])


def curvature_residual(grid, phi, A, kappa):
    """``curl A - kappa Im(phi_1 conj(phi_2))``."""
    return hgeom.curl(grid, A) - kappa * np.imag(phi[0] * np.conj(phi[1]))


def commutator_residual(grid, phi, A, kappa, psi):
    """``[D_r, D_theta] psi - i kappa Im(phi_r conj(phi_theta)) psi`` in coordinate
    components (``A_theta = sinh r A_2``)."""
    s = grid.sinh_r[:, None]
    Ar, At = A[0], s * A[1]

    def D_r(f, parity):
        return d_r(grid, f, parity) + 1j * Ar * f

    def D_t(f):
        return d_theta(grid, f) + 1j * At * f

    lhs = D_r(D_t(psi), 1) - D_t(D_r(psi, 1))
    rhs = 1j * kappa * np.imag(phi[0] * np.conj(s * phi[1])) * psi
    return lhs - rhs


def _norms(grid, f, interior):
    sl = slice(0, grid.nr - interior)
    a = np.abs(f)
    w = np.zeros(grid.shape)
    w[sl] = 1.0
    l2 = math.sqrt(hgeom.integrate(grid, w * a**2))
    return l2, float(np.max(a[sl]))


def gauge_identities_check(gd: GaugeData, levels=None, interior: int = 3,
                           baseline: GaugeData | None = None) -> dict:
    """L2 and sup residuals of the caloric-gauge identities at the chosen s-levels.

    Keys: ``div`` (heat tension equals the covariant divergence), ``torsion``,
    ``curvature`` (``curl A`` against ``kappa Im(phi_1 conj phi_2)``),
    ``commutator`` (on ``exp(-r^2)``) and ``A_direct_vs_integral``. When a
    ``baseline`` gauge (same grid, unperturbed map) is supplied, the ``excess``
    entries subtract its residual fields level by level, which removes the
    discretization error of the limit map itself.
    """
    g = gd.grid
    if levels is None:
        levels = range(len(gd.s))
    psi = np.exp(-g.R**2).astype(np.complex128)

    def fields(data, k):
        phi, A, kap = data.phi[k], data.A[k], data.kappa[k]
        return {
            "div": data.phi_s[k] - covariant_divergence(g, phi, A),
            "torsion": torsion(g, phi, A),
            "curvature": curvature_residual(g, phi, A, kap),
            "commutator": commutator_residual(g, phi, A, kap, psi),
            "A_direct_vs_integral": np.sqrt(np.sum((data.A[k] - data.A_int[k]) ** 2, axis=0)),
        }

    out: dict = {}
    for k in levels:
        f = fields(gd, k)
        base = fields(baseline, min(k, len(baseline.s) - 1)) if baseline is not None else None
        for key, val in f.items():
            l2, sup = _norms(g, val, interior)
            rec = out.setdefault(key, {"l2": [], "sup": [], "excess_l2": []})
            rec["l2"].append(l2)
            rec["sup"].append(sup)
            if base is not None:
                rec["excess_l2"].append(_norms(g, val - base[key], interior)[0])
    out["levels"] = list(levels)
    return out


@dataclass
class SmoothingReport:
    s: np.ndarray
    h2: np.ndarray
    slope: float
    window: tuple
    long_rate: float
    long_window: tuple


def h2_norm(grid: HyperbolicGrid, f: np.ndarray) -> float:
    """``(|f|^2 + |grad f|^2 + |Delta f|^2)^(1/2)`` integrated, Dirichlet closure."""
    d = gradient(grid, f, boundary=0.0)
    lap = hgeom.laplace_beltrami_pointwise(grid, f, 0.0)
    return math.sqrt(sum(hgeom.l2_norm(grid, x) ** 2 for x in (f, d[0], d[1], lap)))


def tension_smoothing(gd: GaugeData, window=(0.01, 1.0), long_window=(5.0, math.inf)) -> SmoothingReport:
    """Log-log slope of ``||phi_s||_H2`` on ``window`` and the exponential rate
    fitted on ``long_window``."""
    h2 = np.array([h2_norm(gd.grid, p) for p in gd.phi_s])
    s = gd.s
    m = (s >= window[0]) & (s <= window[1]) & (h2 > 0)
    slope = float(np.polyfit(np.log(s[m]), np.log(h2[m]), 1)[0]) if m.sum() >= 2 else math.nan
    ml = (s >= long_window[0]) & (s <= long_window[1]) & (h2 > 0)
    rate = -float(np.polyfit(s[ml], np.log(h2[ml]), 1)[0]) if ml.sum() >= 2 else math.nan
    return SmoothingReport(s.copy(), h2, slope, tuple(window), rate, tuple(long_window))
