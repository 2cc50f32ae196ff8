"""Linearized operator around a harmonic map and its heat semigroup.

``H f = Delta_A f - i kappa Im(phi^j conj(f)) phi_j`` acts on complex fields.
The conjugation makes it real-linear only, so matrices are assembled on the
realified unknowns ``(Re f, Im f)``. The magnetic Laplacian uses link
variables on the same faces as the conservative scalar Laplacian, which keeps
``H`` exactly symmetric in ``Re integrate(f conj(g))``. With a Dirichlet
closure the quadratic form of ``H`` is nonpositive; the decaying semigroup
solves ``d_s g = H g``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from hypslab import hgeom
from hypslab.hgeom import HyperbolicGrid
from hypslab.target import MapField, TargetSurface

__all__ = ["LinearizedOperator", "assemble_H", "spectrum_bottom", "heat_semigroup_H",
           "smoothing_check", "SpectrumError", "SmoothingReport", "near_delta",
           "critical_profile"]


class SpectrumError(RuntimeError):
    pass


def _face_links(grid: HyperbolicGrid, A: np.ndarray):
    """Phases ``exp(i int A)`` along radial edges (ring i -> i+1) and angular
    edges (column j -> j+1)."""
    Ar = 0.5 * (A[0][:-1] + A[0][1:]) * grid.dr
    At = 0.5 * (A[1] + np.roll(A[1], -1, axis=1)) * grid.sinh_r[:, None] * grid.dtheta
    return np.exp(1j * Ar), np.exp(1j * At)


@dataclass
class LinearizedOperator:
    grid: HyperbolicGrid
    A: np.ndarray  # (2, nr, ntheta) orthonormal components
    phi: np.ndarray  # (2, nr, ntheta) complex
    kappa: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        g = self.grid
        g.check(self.A, 2)
        g.check(self.phi, 2)
        g.check(self.kappa)
        self._ur, self._ut = _face_links(g, np.asarray(self.A, dtype=float))

    @property
    def is_free(self) -> bool:
        return not (np.any(self.A) or np.any(self.phi))

    def magnetic_laplacian(self, f: np.ndarray) -> np.ndarray:
        g = self.grid
        f = np.asarray(f, dtype=np.complex128)
        g.check(f)
        ur, ut = self._ur, self._ut
        flux = np.zeros(g.shape, dtype=np.complex128)
        # radial faces
        fr = g.cr[:, None] * (ur * f[1:] - f[:-1])
        flux[:-1] += fr
        flux[1:] -= np.conj(ur) * fr
        # homogeneous Dirichlet closure at the outer face
        flux[-1] -= g.cb * f[-1]
        # angular faces
        ft = g.ct[:, None] * (ut * np.roll(f, -1, axis=1) - f)
        flux += ft
        flux -= np.roll(np.conj(ut) * ft, 1, axis=1)
        return flux / g.vol[:, None]

    def curvature_term(self, f: np.ndarray) -> np.ndarray:
        im = np.imag(self.phi[0] * np.conj(f)) * self.phi[0] \
            + np.imag(self.phi[1] * np.conj(f)) * self.phi[1]
        return -1j * self.kappa * im

    def apply(self, f: np.ndarray) -> np.ndarray:
        return self.magnetic_laplacian(f) + self.curvature_term(f)

    __call__ = apply

    def pairing(self, f: np.ndarray, g: np.ndarray) -> float:
        """Real L2 pairing ``Re int f conj(g)``."""
        return hgeom.inner(self.grid, f, g)

    def complex_part(self) -> sp.csr_matrix:
        """Complex sparse matrix of the complex-linear part
        ``Delta_A f + (kappa/2) |phi|^2 f`` (radius-major unknowns)."""
        if "M" in self._cache:
            return self._cache["M"]
        g = self.grid
        n = g.nr * g.ntheta
        idx = np.arange(n).reshape(g.shape)
        rows, cols, vals = [], [], []

        def add(i, j, v):
            rows.append(i.ravel())
            cols.append(j.ravel())
            vals.append(np.broadcast_to(v, i.shape).ravel())

        vol = g.vol[:, None] * np.ones((1, g.ntheta))
        cr = g.cr[:, None] * np.ones((1, g.ntheta))
        # radial couplings
        add(idx[:-1], idx[1:], cr * self._ur / vol[:-1])
        add(idx[1:], idx[:-1], cr * np.conj(self._ur) / vol[1:])
        diag = np.zeros(g.shape)
        diag[:-1] -= cr
        diag[1:] -= cr
        diag[-1] -= g.cb
        ct = g.ct[:, None] * np.ones((1, g.ntheta))
        add(idx, np.roll(idx, -1, axis=1), ct * self._ut / vol)
        add(np.roll(idx, -1, axis=1), idx, ct * np.conj(self._ut) / np.roll(vol, -1, axis=1))
        diag -= 2.0 * ct
        p2 = np.abs(self.phi[0]) ** 2 + np.abs(self.phi[1]) ** 2
        add(idx, idx, diag / vol + 0.5 * self.kappa * p2)
        M = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n, n)).tocsr()
        self._cache["M"] = M
        return M

    def realified(self) -> sp.csr_matrix:
        """Sparse matrix of ``H`` on ``(Re f, Im f)`` stacked, radius-major."""
        if "K" in self._cache:
            return self._cache["K"]
        M = self.complex_part()
        # conjugate-linear part: C conj(f), C = -kappa/2 sum phi_j^2
        c = (-0.5 * self.kappa * (self.phi[0] ** 2 + self.phi[1] ** 2)).ravel()
        Cr, Ci = sp.diags(c.real), sp.diags(c.imag)
        Mr, Mi = M.real, M.imag
        K = sp.bmat([[Mr + Cr, -Mi + Ci], [Mi + Ci, Mr - Cr]], format="csr")
        self._cache["K"] = K
        return K

    def weights(self) -> np.ndarray:
        w = np.repeat(self.grid.vol, self.grid.ntheta)
        return np.concatenate([w, w])


def _to_real(f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=np.complex128).ravel()
    return np.concatenate([f.real, f.imag])


def _to_complex(x: np.ndarray, shape) -> np.ndarray:
    n = x.size // 2
    return (x[:n] + 1j * x[n:]).reshape(shape)


def assemble_H(Q: MapField | None, target: TargetSurface | None = None,
               limit=None, grid: HyperbolicGrid | None = None) -> LinearizedOperator:
    """Operator at the harmonic map ``Q`` in the limit frame ``limit``
    (computed from ``Q`` when omitted). ``Q=None`` gives the free Laplacian."""
    if Q is None:
        if grid is None:
            raise ValueError("grid is required for the free operator")
        z = np.zeros((2,) + grid.shape)
        return LinearizedOperator(grid, z, z.astype(np.complex128), np.zeros(grid.shape))
    if limit is None:
        from hypslab.caloric import limit_frame
        limit = limit_frame(Q, target)
    return LinearizedOperator(Q.grid, np.asarray(limit.A, dtype=float), limit.phi,
                              np.asarray(limit.kappa, dtype=float))


def spectrum_bottom(op: LinearizedOperator, mode: str = "H", tol: float = 1e-8) -> float:
    """Smallest eigenvalue of ``-H`` (``mode="H"``) or ``-Delta`` (``"laplacian"``)
    with the Dirichlet closure, by shift-invert Lanczos on the realified,
    volume-symmetrized matrix."""
    if mode == "laplacian":
        op = assemble_H(None, grid=op.grid)
    elif mode != "H":
        raise ValueError(f"unknown mode {mode!r}")
    K = op.realified()
    s = np.sqrt(op.weights())
    S = sp.diags(s) @ (-K) @ sp.diags(1.0 / s)
    S = 0.5 * (S + S.T)
    try:
        vals = spla.eigsh(S.tocsc(), k=1, sigma=-1e-3, which="LM", tol=tol,
                          return_eigenvectors=False, v0=np.ones(S.shape[0]))
    except spla.ArpackNoConvergence as exc:
        raise SpectrumError("inverse iteration did not converge") from exc
    return float(vals[0])


_GAMMA = 1.0 - 1.0 / math.sqrt(2.0)


class _SemigroupStepper:
    """Two-stage L-stable SDIRK2 for ``g' = H g`` (the implicit half of the
    IMEX pair used by the heat flow, applied to a fully linear problem)."""

    def __init__(self, op: LinearizedOperator):
        self.op = op
        self.K = op.realified().tocsc()
        self._lu = {}

    def _solver(self, h):
        key = round(h, 15)
        if key not in self._lu:
            n = self.K.shape[0]
            self._lu[key] = spla.splu((sp.identity(n, format="csc") - _GAMMA * h * self.K).tocsc())
        return self._lu[key]

    def step(self, x, h):
        lu = self._solver(h)
        y2 = lu.solve(x)
        return lu.solve(x + (1.0 - _GAMMA) * h * (self.K @ y2))


def _lattice(s: float, ds: float) -> np.ndarray:
    n = max(1, int(math.ceil(s / ds - 1e-9)))
    return np.full(n, s / n)


def heat_semigroup_H(f: np.ndarray, s: float, op: LinearizedOperator, ds: float = 1e-3,
                     record: np.ndarray | None = None):
    """``exp(s H) f`` by SDIRK2 with steps of at most ``ds``.

    With ``record`` (increasing s values), returns the list of fields at those
    times instead; each segment between records is stepped uniformly.
    """
    if s < 0:
        raise ValueError("s must be nonnegative")
    grid = op.grid
    if s == 0 and record is None:
        return np.array(f, dtype=np.complex128, copy=True)
    st = _SemigroupStepper(op)
    x = _to_real(f)
    marks = [s] if record is None else list(record)
    out, now = [], 0.0
    for m in marks:
        if m > now:
            for h in _lattice(m - now, ds):
                x = st.step(x, h)
            now = m
        out.append(_to_complex(x, grid.shape))
    return out[0] if record is None else out


def near_delta(grid: HyperbolicGrid, width: float | None = None) -> np.ndarray:
    """L2-normalized Gaussian bump of a few cells at the origin."""
    w = 2.0 * grid.dr if width is None else width
    f = np.exp(-(grid.R / w) ** 2).astype(np.complex128)
    return f / hgeom.l2_norm(grid, f)


def critical_profile(grid: HyperbolicGrid, core: float | None = None,
                     outer: float = 1.0) -> np.ndarray:
    """``1/r`` with a grid-scale core and a Gaussian cutoff at ``outer``.

    Its energy is spread evenly over dyadic frequency bands, so the L2 to
    H1 smoothing rate ``s^(-1/2)`` is attained over the whole resolved range.
    """
    c = grid.dr if core is None else core
    f = (np.exp(-(grid.R / outer) ** 2) / np.sqrt(grid.R**2 + c**2)).astype(np.complex128)
    return f / hgeom.l2_norm(grid, f)


@dataclass
class SmoothingReport:
    s: np.ndarray
    grad_norm: np.ndarray
    l2_norm: np.ndarray
    short_slope: float
    long_rate: float
    short_window: tuple
    long_window: tuple


def _fit(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    return float(np.linalg.lstsq(A, y, rcond=None)[0][0])


def smoothing_check(op: LinearizedOperator, f: np.ndarray | None = None, ds: float = 1e-3,
                    short_window=None, long_window=(2.0, 10.0), nsamples: int = 24) -> SmoothingReport:
    """Fit ``log ||grad exp(sH) f||`` against ``log s`` on the short window and
    against ``s`` on the long window."""
    g = op.grid
    if f is None:
        f = critical_profile(g)
    if short_window is None:
        short_window = (10 * ds, 0.5)
    a, b = short_window
    if not (0 < a < b) or long_window[0] >= long_window[1]:
        raise ValueError("degenerate fit window")
    s_short = np.geomspace(a, b, nsamples)
    s_long = np.linspace(long_window[0], long_window[1], nsamples)
    s_all = np.unique(np.concatenate([s_short, s_long]))
    fields = heat_semigroup_H(f, s_all[-1], op, ds=ds, record=s_all)
    gn = np.array([math.sqrt(sum(hgeom.l2_norm(g, c) ** 2 for c in hgeom.gradient(g, u, boundary=0.0)))
                   for u in fields])
    ln = np.array([hgeom.l2_norm(g, u) for u in fields])
    ms = (s_all >= a - 1e-12) & (s_all <= b + 1e-12)
    ml = (s_all >= long_window[0] - 1e-12) & (s_all <= long_window[1] + 1e-12)
    if ms.sum() < 3 or ml.sum() < 3 or np.any(gn <= 0):
        raise ValueError("degenerate fit window")
    slope = _fit(np.log(s_all[ms]), np.log(gn[ms]))
    rate = -_fit(s_all[ml], np.log(gn[ml]))
    return SmoothingReport(s_all, gn, ln, slope, rate, tuple(short_window), tuple(long_window))
