import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hypslab import diag, hgeom
from hypslab.hgeom import ModalSpectrum, build_grid


def test_weight_closed_forms():
    r = np.linspace(0.01, 12.0, 400)
    w = diag.morawetz_weight(r)
    # a = 2 log cosh(r/2) integrates tanh(r/2) from 0
    ref = 2 * np.log(np.cosh(r / 2))
    assert np.max(np.abs(w.a - ref)) < 1e-9
    assert np.max(np.abs(w.laplacian - 1.0)) < 1e-13


@given(r=st.floats(0.05, 20.0))
def test_weight_derivatives_match_differences(r):
    h = 1e-5
    w = diag.morawetz_weight(np.array([r - h, r, r + h]))
    assert abs((w.da[2] - w.da[0]) / (2 * h) - w.d2a[1]) < 1e-7


@pytest.fixture(scope="module")
def small_grid():
    return build_grid(24, 16, 6.0)


def test_free_run_conserves_mass_and_energy(small_grid):
    g = small_grid
    u0 = diag.gaussian_data(g, 0.5, 0.0, 1.0, momentum=1.0)
    run = diag.run_linear(u0, g, 0.4, 0.02)
    m = np.array([hgeom.l2_norm(g, u) for u in run.u])
    assert np.max(np.abs(m - m[0])) / m[0] < 1e-12
    assert diag.energy_estimate_monitor(run).relative_drift < 1e-10


def test_static_potential_energy_conserved(small_grid):
    g = small_grid
    A = diag.radial_test_potential(g, 0.3)
    run = diag.run_linear(diag.gaussian_data(g), g, 0.4, 0.02, A=A)
    rep = diag.energy_estimate_monitor(run)
    assert rep.relative_drift < 1e-10
    assert np.all(rep.accumulator == 0)


def test_time_dependent_potential_accumulator_bounds_drift(small_grid):
    g = small_grid
    A0 = diag.radial_test_potential(g, 0.3)
    run = diag.run_linear(diag.gaussian_data(g), g, 0.4, 0.01, A_of_t=lambda t: (1 + t) * A0)
    rep = diag.energy_estimate_monitor(run)
    assert np.all(np.abs(rep.energy - rep.energy[0]) <= 1.05 * rep.accumulator + 1e-12)


def test_morawetz_residual_small_and_refines():
    res = []
    for k in (1, 2):
        g = build_grid(20 * k, 20 * k, 8.0)
        u0 = diag.gaussian_data(g, 0.5, 0.0, 1.0, momentum=1.0)
        run = diag.run_linear(u0, g, 0.3, 0.02 / k)
        res.append(diag.morawetz_identity_residual(run).relative_residual)
    assert res[1] < 0.05 and res[1] < res[0] / 2.5


def test_morawetz_imaginary_artifact_second_order():
    # i <u, T u> is real in the continuum; the discrete imaginary part is O(h^2)
    ims = []
    for k in (1, 2, 4):
        g = build_grid(24 * k, 16 * k, 6.0)
        u = diag.gaussian_data(g, 0.5, 0.2, 1.0, momentum=2.0)
        ims.append(abs(diag.morawetz_bilinear(g, u, u, None, diag.morawetz_weight(g)).imag))
    assert ims[1] / ims[2] > 3.5 and ims[0] / ims[1] > 3.5


def test_free_schrodinger_unitary_and_reversible(small_grid):
    g = small_grid
    spec = ModalSpectrum(g)
    f = diag.gaussian_data(g, 1.0, 0.4, 0.8, momentum=1.5)
    u = diag.free_schrodinger(spec, f, 0.7, 0.01)
    assert abs(hgeom.l2_norm(g, u) - hgeom.l2_norm(g, f)) < 1e-12 * hgeom.l2_norm(g, f)
    back = diag.free_schrodinger(spec, u, -0.7, 0.01)
    assert np.max(np.abs(back - f)) < 1e-12


def test_free_schrodinger_matches_run_linear(small_grid):
    g = small_grid
    f = diag.gaussian_data(g)
    run = diag.run_linear(f, g, 0.2, 0.02)
    # modal form uses the conservative Laplacian; both are second-order midpoint runs
    u = diag.free_schrodinger(ModalSpectrum(g), f, 0.2, 0.02)
    assert np.max(np.abs(u - run.u[-1])) < 1e-8


def test_diagnostic_log_requires_increasing_time():
    log = diag.DiagnosticLog()
    log.append(t=0.0, energy=1.0)
    log.append(t=0.5, energy=0.9)
    with pytest.raises(ValueError):
        log.append(t=0.5)
    assert np.allclose(log.column("energy"), [1.0, 0.9])
    assert math.isnan(log.column("dist_sup")[0])


def test_weighted_gradient_ratio_finite(small_grid):
    g = small_grid
    run = diag.run_linear(diag.gaussian_data(g), g, 0.5, 0.05)
    rep = diag.weighted_gradient_bound_check(run)
    assert rep.lhs > 0 and 0 < rep.ratio < math.inf


def test_h1_norm_of_zero(small_grid):
    assert diag.h1_norm(small_grid, np.zeros(small_grid.shape)) == 0.0
