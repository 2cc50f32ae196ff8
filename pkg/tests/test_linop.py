import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hypslab import hgeom, linop
from hypslab.hgeom import build_grid
from hypslab.target import holomorphic_map, make_spec, poincare_disk_target

T = poincare_disk_target()


@pytest.fixture(scope="module")
def op():
    g = build_grid(24, 16, 6.0)
    Q = holomorphic_map(make_spec("holomorphic", [0, 0.5]), g)
    return linop.assemble_H(Q, T)


@given(seed=st.integers(0, 2**31 - 1))
def test_H_symmetric_in_real_pairing(op, seed):
    g = op.grid
    r = np.random.default_rng(seed)
    f = r.standard_normal(g.shape) + 1j * r.standard_normal(g.shape)
    h = r.standard_normal(g.shape) + 1j * r.standard_normal(g.shape)
    scale = hgeom.l2_norm(g, f) * hgeom.l2_norm(g, h)
    assert abs(op.pairing(op(f), h) - op.pairing(f, op(h))) <= 1e-10 * scale
    assert -op.pairing(op(f), f) >= -1e-10 * hgeom.l2_norm(g, f) ** 2


def test_realified_matrix_matches_apply(op, rng):
    g = op.grid
    f = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    y = op.realified() @ np.concatenate([f.real.ravel(), f.imag.ravel()])
    n = y.size // 2
    assert np.max(np.abs(y[:n] + 1j * y[n:] - op(f).ravel())) < 1e-9


def test_free_operator_is_laplacian(rng):
    g = build_grid(16, 16, 4.0)
    free = linop.assemble_H(None, grid=g)
    f = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    assert np.max(np.abs(free(f) - hgeom.laplace_beltrami(g, f, 0.0))) < 1e-9


def test_assemble_free_requires_grid():
    with pytest.raises(ValueError):
        linop.assemble_H(None)


def test_dirichlet_bottom_above_quarter():
    g = build_grid(64, 16, 8.0)
    lam = linop.spectrum_bottom(linop.assemble_H(None, grid=g), "laplacian")
    assert 0.25 < lam < 0.45


def test_bottom_of_H_close_to_laplacian():
    g = build_grid(64, 16, 8.0)
    Q = holomorphic_map(make_spec("holomorphic", [0, 0.5]), g)
    op = linop.assemble_H(Q, T)
    a = linop.spectrum_bottom(op, "H")
    b = linop.spectrum_bottom(op, "laplacian")
    assert a > 0 and abs(a - b) < 0.05


def test_semigroup_contracts(op):
    g = op.grid
    f = linop.near_delta(g, 0.5)
    out = linop.heat_semigroup_H(f, 0.5, op, ds=0.01, record=[0.1, 0.5])
    n = [hgeom.l2_norm(g, x) for x in out]
    assert n[1] < n[0] < 1.0


def test_smoothing_slope_for_critical_profile():
    g = build_grid(64, 32, 6.0)
    rep = linop.smoothing_check(linop.assemble_H(None, grid=g), ds=2e-3, short_window=(0.02, 0.5),
                                long_window=(2.0, 6.0), nsamples=12)
    assert abs(rep.short_slope + 0.5) < 0.15 and rep.long_rate > 0


def test_unknown_spectrum_mode(op):
    with pytest.raises(ValueError):
        linop.spectrum_bottom(op, "resolvent")
