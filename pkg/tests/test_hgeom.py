import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hypslab import _backend, _kernels_py, hgeom
from hypslab.hgeom import ConfigurationError, build_grid


def radial(g, fn):
    return np.broadcast_to(fn(g.r)[:, None], g.shape).copy()


def test_grid_rejects_odd_ntheta():
    with pytest.raises(ConfigurationError, match="ntheta"):
        build_grid(16, 7, 4.0)


def test_grid_rejects_nonpositive_rmax():
    with pytest.raises(ConfigurationError, match="rmax"):
        build_grid(16, 16, 0.0)


def test_total_volume_matches_disk_area():
    g = build_grid(400, 16, 3.0)
    area = 2 * math.pi * (math.cosh(3.0) - 1)
    assert abs(hgeom.integrate(g, np.ones(g.shape)) - area) / area < 1e-5


def test_conservative_laplacian_is_symmetric(rng):
    g = build_grid(24, 16, 5.0)
    f, h = rng.standard_normal(g.shape), rng.standard_normal(g.shape)
    a = hgeom.inner(g, hgeom.laplace_beltrami(g, f), h)
    b = hgeom.inner(g, f, hgeom.laplace_beltrami(g, h))
    assert abs(a - b) <= 1e-12 * max(abs(a), 1.0)


def test_conservative_laplacian_is_negative(rng):
    g = build_grid(24, 16, 5.0)
    f = rng.standard_normal(g.shape)
    assert hgeom.inner(g, hgeom.laplace_beltrami(g, f), f) < 0


def _radial_error(nr, op):
    # f = exp(-r^2): Delta f = f'' + coth(r) f'
    g = build_grid(nr, 16, 4.0)
    f = radial(g, lambda r: np.exp(-r**2))
    exact = radial(g, lambda r: (4 * r**2 - 2) * np.exp(-r**2) - 2 * r * np.exp(-r**2) / np.tanh(r))
    return float(np.max(np.abs(op(g, f, math.exp(-16.0)) - exact)))


def test_pointwise_laplacian_second_order_sup_norm():
    e1 = _radial_error(64, hgeom.laplace_beltrami_pointwise)
    e2 = _radial_error(128, hgeom.laplace_beltrami_pointwise)
    assert 3.0 < e1 / e2 < 5.0


def test_conservative_laplacian_converges():
    e1 = _radial_error(64, hgeom.laplace_beltrami)
    e2 = _radial_error(128, hgeom.laplace_beltrami)
    assert e2 < e1


def _mode2_error(nr):
    # f = r^2 e^{-r^2} cos(2 theta): Delta f = f_rr + coth f_r - 4 f / sinh^2
    g = build_grid(nr, nr, 4.0)

    def prof(r):
        return r**2 * np.exp(-r**2)

    def d1(r):
        return (2 * r - 2 * r**3) * np.exp(-r**2)

    def d2(r):
        return (2 - 10 * r**2 + 4 * r**4) * np.exp(-r**2)
    c = np.cos(2 * g.TH)
    f = prof(g.R) * c
    exact = (d2(g.R) + d1(g.R) / np.tanh(g.R) - 4 * prof(g.R) / np.sinh(g.R) ** 2) * c
    b = prof(4.0) * np.cos(2 * g.theta)
    return float(np.max(np.abs(hgeom.laplace_beltrami_pointwise(g, f, b) - exact)))


def test_angular_mode_of_pointwise_laplacian_second_order():
    assert 3.0 < _mode2_error(32) / _mode2_error(64) < 5.0


def _div_curl(nr):
    g = build_grid(nr, nr, 4.0)
    f = np.exp(-g.R**2) * (1 + 0.5 * g.R * np.cos(g.TH))
    b = math.exp(-16.0) * (1 + 2 * np.cos(g.theta))
    grad = hgeom.gradient(g, f, boundary=b)
    lap = hgeom.laplace_beltrami_pointwise(g, f, b)
    far = (g.r > 0.5) & (g.r < 3.0)
    return (float(np.max(np.abs(hgeom.divergence(g, grad) - lap)[far])),
            float(np.max(np.abs(hgeom.curl(g, grad))[far])))


def test_divergence_and_curl_of_gradient_converge():
    (d1, c1), (d2, c2) = _div_curl(32), _div_curl(64)
    assert d1 / d2 > 3.0 and c1 / c2 > 3.0
    assert d2 < 1e-2 and c2 < 2e-3


@given(nr=st.integers(8, 24), half=st.integers(4, 12), rmax=st.floats(0.5, 8.0),
       seed=st.integers(0, 2**31 - 1))
def test_backend_parity_laplacian(nr, half, rmax, seed):
    g = build_grid(nr, 2 * half, rmax)
    r = np.random.default_rng(seed)
    f = r.standard_normal(g.shape) + 1j * r.standard_normal(g.shape)
    b = r.standard_normal(g.ntheta) + 0j
    ref = _kernels_py.laplacian(f, b, g.cr, g.cb, g.ct, g.vol)
    got = _backend.laplacian(f, b, g.cr, g.cb, g.ct, g.vol)
    assert np.allclose(got, ref, rtol=1e-12, atol=1e-12 * np.max(np.abs(ref)))


@given(seed=st.integers(0, 2**31 - 1))
def test_laplacian_annihilates_constants(seed):
    g = build_grid(16, 8, 3.0)
    c = np.random.default_rng(seed).standard_normal()
    out = hgeom.laplace_beltrami(g, np.full(g.shape, c), c)
    assert np.max(np.abs(out)) <= 1e-9 * (1 + abs(c))


def test_backend_name_is_reported():
    assert _backend.NAME in ("cython", "python")


@pytest.mark.parametrize("cls,op", [(hgeom.ModalSolver, hgeom.laplace_beltrami),
                                    (hgeom.PointwiseModalSolver, hgeom.laplace_beltrami_pointwise)])
def test_modal_solvers_invert_their_operator(rng, cls, op):
    g = build_grid(20, 16, 4.0)
    x = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    b = rng.standard_normal(g.ntheta) + 0j
    a, c = 1.0, -0.3
    y = a * x + c * op(g, x, b)
    back = cls(g).solve(y, a, c, boundary=b)
    assert np.max(np.abs(back - x)) < 1e-9


def test_modal_spectrum_matches_conservative_operator(rng):
    g = build_grid(20, 16, 4.0)
    spec = hgeom.ModalSpectrum(g)
    f = rng.standard_normal(g.shape)
    lap = spec.apply(f, lambda lam: -lam)
    assert np.max(np.abs(lap - hgeom.laplace_beltrami(g, f))) < 1e-9
    assert np.all(spec.evals > 0)
