"""Schrodinger map flow ``w_t = i tau(w)`` in the conformal chart of the target.

The complex structure of a conformal chart is multiplication by ``i``, so
the flow needs no metric factor beyond those inside the tension. The default
integrator is the implicit midpoint rule with the Laplacian part solved
exactly by the modal solver and the nonlinear remainder iterated to a fixed
point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from hypslab import hgeom
from hypslab.caloric import (GaugeData, LimitFrame, _cumulative_from_top, frame_components,
                             gauge_fields, modal_solver, remainder, run_heat_flow,
                             transport_frames)
from hypslab.hgeom import gradient, laplace_beltrami_pointwise
from hypslab.target import MapField, TargetSurface, energy_arrays, tension_arrays


class SLStepError(RuntimeError):
    pass


class BlowupError(RuntimeError):
    pass


def default_dt(grid: hgeom.HyperbolicGrid) -> float:
    """Accuracy-limited time step for smooth perturbations.

    Implicit midpoint is unconditionally stable, so the step only has to
    resolve the data, not the fastest grid mode.
    """
    return min(0.01, 0.5 * grid.dr**2)


def _rhs_linear(g, w, b, dt):
    return w + 0.5j * dt * hgeom.laplace_beltrami(g, w, b)


def step_sl(u: MapField, dt: float, target: TargetSurface, scheme: str = "midpoint",
            tol: float = 1e-12, max_iter: int = 50) -> MapField:
    """Advance ``u`` by ``dt`` (negative ``dt`` steps backward)."""
    g, w0, b = u.grid, u.w, u.boundary
    if scheme == "rk4":
        def f(x):
            return 1j * tension_arrays(g, target, x, b)
        k1 = f(w0)
        k2 = f(w0 + 0.5 * dt * k1)
        k3 = f(w0 + 0.5 * dt * k2)
        k4 = f(w0 + dt * k3)
        w1 = w0 + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    elif scheme == "midpoint":
        solver = modal_solver(g)
        base = _rhs_linear(g, w0, b, dt)
        w1 = w0
        scale = max(1.0, float(np.max(np.abs(w0))))
        for it in range(max_iter):
            wm = 0.5 * (w0 + w1)
            new = solver.solve(base + 1j * dt * remainder(g, target, wm, b), 1.0,
                               -0.5j * dt, boundary=b)
            delta = float(np.max(np.abs(new - w1)))
            w1 = new
            if not np.isfinite(delta):
                raise SLStepError("non-finite value in fixed-point iteration")
            if delta <= tol * scale:
                break
        else:
            raise SLStepError(f"fixed point not reached in {max_iter} iterations "
                              f"(last update {delta:.3e})")
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    if not np.all(np.isfinite(w1)):
        raise SLStepError("non-finite value after step")
    return u.with_values(w1)


def grad_sup(u: MapField, target: TargetSurface) -> float:
    from hypslab.target import energy_density

    return float(np.sqrt(np.max(energy_density(u, target))))


@dataclass
class SLTrajectory:
    grid: hgeom.HyperbolicGrid
    target: TargetSurface
    dt: float
    times: np.ndarray  # every step
    energy: np.ndarray
    dist_sup: np.ndarray  # ||u - Q||_inf per step (nan without Q)
    grad_sup: np.ndarray
    sample_times: list = field(default_factory=list)
    samples: list = field(default_factory=list)  # MapField at sample times
    iterations: list = field(default_factory=list)

    def sample(self, k: int) -> MapField:
        return self.samples[k]


def run_sl(u0: MapField, T: float, dt: float, target: TargetSurface,
           Q: MapField | None = None, sample_every: int = 1, blowup_ceiling: float = 1e3,
           scheme: str = "midpoint", tol: float = 1e-12) -> SLTrajectory:
    """Evolve ``u0`` to time ``T`` with fixed steps; keeps every
    ``sample_every``-th state and logs energy and distance to ``Q`` each step."""
    nsteps = int(round(T / dt))
    if nsteps < 0 or abs(nsteps * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError("T must be a nonnegative multiple of dt")
    times = np.arange(nsteps + 1) * dt
    energy = np.empty(nsteps + 1)
    dist = np.full(nsteps + 1, np.nan)
    gsup = np.empty(nsteps + 1)
    traj = SLTrajectory(u0.grid, target, dt, times, energy, dist, gsup)
    u = u0
    for n in range(nsteps + 1):
        if n > 0:
            u = step_sl(u, dt, target, scheme=scheme, tol=tol)
            u.validate()
        energy[n] = energy_arrays(u.grid, target, u.w, u.boundary)
        if Q is not None:
            dist[n] = float(np.max(np.abs(u.w - Q.w)))
        gsup[n] = grad_sup(u, target)
        if gsup[n] > blowup_ceiling:
            raise BlowupError(f"gradient sup {gsup[n]:.3e} exceeds ceiling at t={times[n]:.4g}")
        if n % sample_every == 0 or n == nsteps:
            traj.sample_times.append(float(times[n]))
            traj.samples.append(u)
    return traj


def chart_distance_sup(u: MapField, Q: MapField, target: TargetSurface) -> float:
    """Sup over nodes of the metric length of the chart segment from ``Q`` to ``u``."""
    x, wts = np.polynomial.legendre.leggauss(6)
    d = u.w - Q.w
    acc = np.zeros(u.grid.shape)
    for xi, wi in zip(x, wts):
        acc += 0.5 * wi * target.rho(Q.w + 0.5 * (xi + 1) * d)
    return float(np.max(acc * np.abs(d)))


# ---------------------------------------------------------------------------
# caloric-gauge residuals along the Schrodinger flow


@dataclass
class HeatSettings:
    smax: float = 20.0
    ds0: float | None = None
    growth: float = 1.2
    ds_cap: float = 0.25


def gauge_at(u: MapField, target: TargetSurface, Q: MapField, lf: LimitFrame,
             heat: HeatSettings | None = None) -> tuple:
    """Heat flow from ``u``, transported frames and gauge fields."""
    heat = heat or HeatSettings()
    tr = run_heat_flow(u, target, smax=heat.smax, ds0=heat.ds0, growth=heat.growth,
                       ds_cap=heat.ds_cap)
    fr = transport_frames(tr, lf.frame, Q, strict=False)
    return tr, gauge_fields(tr, fr, lf)


def magnetic_laplacian(grid, f, A, boundary=None):
    """``(nabla + iA)^j (nabla + iA)_j f`` for a section ``f`` (orthonormal ``A``)."""
    df = gradient(grid, f, boundary=boundary)
    divA = hgeom.divergence(grid, A.astype(np.complex128)).real
    return (hgeom.laplace_beltrami_pointwise(grid, f, boundary)
            + 2j * (A[0] * df[0] + A[1] * df[1]) + 1j * divA * f
            - (A[0] ** 2 + A[1] ** 2) * f)


@dataclass
class TimeSlice:
    """Gauge data at ``t - dt``, ``t``, ``t + dt`` on a common s-lattice."""

    dt: float
    traj: tuple
    gauges: tuple
    Z: np.ndarray
    phi_t: np.ndarray
    Dt_phi_s: np.ndarray  # covariant, frames held at the central time
    dt_phi_s: np.ndarray  # plain difference of caloric components
    A_t_direct: np.ndarray
    A_t_int: np.ndarray


def sl_tension_Z(slices: tuple, dt: float, target: TargetSurface) -> TimeSlice:
    """``Z = phi_t - i phi_s`` on the s-lattice of the central time.

    ``slices`` holds ``(heat trajectory, gauge)`` for the three times.
    ``phi_t`` is the frame component, in the central frames, of the centered
    time difference of ``v``.
    """
    (tm, gm), (t0, g0), (tp, gp) = slices
    if not (len(tm.s) == len(t0.s) == len(tp.s)):
        raise ValueError("time slices must share the s-lattice")
    grid = t0.grid
    b = t0.boundary
    dvdt = (tp.v - tm.v) / (2 * dt)
    phi_t = frame_components(target, t0.v, g0.alpha, dvdt)
    Z = phi_t - 1j * g0.phi_s
    # covariant time derivative of phi_s with frames fixed at the central time
    tau_p = np.array([tension_arrays(grid, target, v, b) for v in tp.v])
    tau_m = np.array([tension_arrays(grid, target, v, b) for v in tm.v])
    tau_0 = np.array([tension_arrays(grid, target, v, b) for v in t0.v])
    dtau = (tau_p - tau_m) / (2 * dt)
    Dt = frame_components(target, t0.v, g0.alpha,
                          dtau + 2 * target.christoffel(t0.v) * dvdt * tau_0)
    plain = (gp.phi_s - gm.phi_s) / (2 * dt)
    dalpha = (gp.alpha - gm.alpha) / (2 * dt)
    At_direct = dalpha + 2 * np.imag(target.christoffel(t0.v) * dvdt)
    integrand = g0.kappa * np.imag(g0.phi_s * np.conj(phi_t))
    At_int = -_cumulative_from_top(t0.s, integrand)
    return TimeSlice(dt, (tm, t0, tp), (gm, g0, gp), Z, phi_t, Dt, plain, At_direct, At_int)


def _l2(grid, f, interior=3):
    w = np.zeros(grid.shape)
    w[: grid.nr - interior] = 1.0
    return math.sqrt(hgeom.integrate(grid, w * np.abs(f) ** 2))


def evolution_residuals(ts: TimeSlice, levels=None, interior: int = 3) -> dict:
    """L2 residuals along s (heat direction) and in t (Schrodinger direction).

    ``phi_s_heat``: ``d_s phi_s - Delta_A phi_s + i kappa Im(phi^j conj phi_s) phi_j``
    on interval midpoints. ``Z_heat``: ``d_s Z - Delta_A Z - i kappa phi^j phi_j
    conj(phi_s) + i kappa Im(phi^j conj Z) phi_j``. ``schrodinger_covariant``:
    ``i D_t phi_s + Delta_A phi_s - i d_s Z - i kappa Im(phi^j conj phi_s) phi_j``.
    ``schrodinger_plain``: same with ``i d_t phi_s - A_t phi_s`` in place of
    ``i D_t phi_s`` and ``A_t`` from the s-integral. ``Z0``: ``|Z|`` at ``s = 0``.
    """
    t0 = ts.traj[1]
    g0 = ts.gauges[1]
    grid = t0.grid
    s = g0.s
    K = len(s) - 1
    if levels is None:
        levels = [k for k in range(K) if 0.1 <= s[k] <= 1.0] or list(range(min(K, 10)))

    def Delta_A(f, k):
        return magnetic_laplacian(grid, f, g0.A[k])

    def curv_term(psi, k):
        phi = g0.phi[k]
        return g0.kappa[k] * (np.imag(phi[0] * np.conj(psi)) * phi[0]
                              + np.imag(phi[1] * np.conj(psi)) * phi[1])

    out = {"levels": list(levels), "s": [float(s[k]) for k in levels]}
    heat, zheat, cov, plain = [], [], [], []
    for k in levels:
        ds = s[k + 1] - s[k]
        # heat-direction identities, centered on the interval [s_k, s_k+1]
        dps = (g0.phi_s[k + 1] - g0.phi_s[k]) / ds
        mid = 0.5 * (
            (Delta_A(g0.phi_s[k], k) - 1j * curv_term(g0.phi_s[k], k))
            + (Delta_A(g0.phi_s[k + 1], k + 1) - 1j * curv_term(g0.phi_s[k + 1], k + 1)))
        heat.append(_l2(grid, dps - mid, interior))

        def zrhs(j):
            phi = g0.phi[j]
            Zj = ts.Z[j]
            return (Delta_A(Zj, j)
                    + 1j * g0.kappa[j] * (phi[0] ** 2 + phi[1] ** 2) * np.conj(g0.phi_s[j])
                    - 1j * curv_term(Zj, j))

        dZ = (ts.Z[k + 1] - ts.Z[k]) / ds
        zheat.append(_l2(grid, dZ - 0.5 * (zrhs(k) + zrhs(k + 1)), interior))
        # Schrodinger direction at level k; d_s Z by a centered difference
        if k == 0:
            dsZ = (ts.Z[1] - ts.Z[0]) / (s[1] - s[0])
        else:
            dsZ = (ts.Z[k + 1] - ts.Z[k - 1]) / (s[k + 1] - s[k - 1])
        rest = Delta_A(g0.phi_s[k], k) - 1j * dsZ - 1j * curv_term(g0.phi_s[k], k)
        cov.append(_l2(grid, 1j * ts.Dt_phi_s[k] + rest, interior))
        plain.append(_l2(grid, 1j * ts.dt_phi_s[k] - ts.A_t_int[k] * g0.phi_s[k] + rest, interior))
    scale = max(_l2(grid, g0.phi_s[levels[0]], interior), 1e-300)
    out.update(phi_s_heat=heat, Z_heat=zheat, schrodinger_covariant=cov,
               schrodinger_plain=plain, phi_s_scale=scale,
               Z0=float(np.max(np.abs(ts.Z[0]))),
               A_t_direct_vs_int=float(np.max(np.abs(ts.A_t_direct - ts.A_t_int)[:, : grid.nr - interior])))
    return out


def time_slice(traj: SLTrajectory, k: int, target: TargetSurface, Q: MapField,
               lf: LimitFrame, heat: HeatSettings | None = None) -> TimeSlice:
    """Gauge data around sample ``k``; samples must be consecutive steps."""
    if k < 1 or k + 1 >= len(traj.samples):
        raise IndexError("time slice needs a sample on both sides")
    dt = traj.sample_times[k + 1] - traj.sample_times[k]
    slices = tuple(gauge_at(traj.samples[j], target, Q, lf, heat) for j in (k - 1, k, k + 1))
    return sl_tension_Z(slices, dt, target)
