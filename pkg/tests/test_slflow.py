import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hypslab import caloric, slflow
from hypslab.hgeom import build_grid
from hypslab.target import dirichlet_energy, holomorphic_map, make_spec, poincare_disk_target

T = poincare_disk_target()


@pytest.fixture(scope="module")
def Q():
    g = build_grid(32, 16, 6.0)
    return caloric.discrete_harmonic(holomorphic_map(make_spec("holomorphic", [0, 0.5]), g), T,
                                     form="variational")


def test_default_dt_accuracy_limited():
    g = build_grid(64, 32, 8.0)
    assert slflow.default_dt(g) == min(0.01, 0.5 * g.dr**2)


def test_harmonic_map_is_stationary(Q):
    tr = slflow.run_sl(Q, 0.2, 0.01, T, Q=Q)
    assert np.nanmax(tr.dist_sup) < 1e-10


def test_midpoint_conserves_energy(Q):
    u0 = caloric.perturbed_map(Q, 0.05, 1.0, 0.3, 1.0, 1 + 0.5j)
    tr = slflow.run_sl(u0, 0.2, 0.01, T, Q=Q)
    assert np.max(np.abs(tr.energy - tr.energy[0])) / tr.energy[0] < 1e-8


@given(eps=st.floats(0.005, 0.05), ang=st.floats(0, 6.28))
def test_midpoint_is_time_reversible(Q, eps, ang):
    u0 = caloric.perturbed_map(Q, eps, 1.0, ang, 1.0, 1j)
    u1 = slflow.step_sl(u0, 0.02, T)
    back = slflow.step_sl(u1, -0.02, T)
    assert np.max(np.abs(back.w - u0.w)) < 1e-10


def test_rk4_and_midpoint_local_errors_shrink(Q):
    # one-step differences of two consistent schemes are O(dt^3)
    u0 = caloric.perturbed_map(Q, 0.03, 1.0, 0.3)
    d = []
    for dt in (1e-3, 5e-4):
        a = slflow.step_sl(u0, dt, T)
        b = slflow.step_sl(u0, dt, T, scheme="rk4")
        d.append(np.max(np.abs(a.w - b.w)))
    assert d[0] < 1e-6 and d[0] / d[1] > 6.0


def test_flow_preserves_energy_not_distance(Q):
    u0 = caloric.perturbed_map(Q, 0.05, 1.0, 0.3)
    tr = slflow.run_sl(u0, 0.5, 0.01, T, Q=Q)
    assert dirichlet_energy(u0, T) > dirichlet_energy(Q, T)
    assert tr.dist_sup[-1] != tr.dist_sup[0]


def test_blowup_ceiling_triggers(Q):
    u0 = caloric.perturbed_map(Q, 0.05, 1.0, 0.3)
    with pytest.raises(slflow.BlowupError):
        slflow.run_sl(u0, 0.02, 0.01, T, blowup_ceiling=1e-3)


def test_T_must_be_multiple_of_dt(Q):
    with pytest.raises(ValueError):
        slflow.run_sl(Q, 0.015, 0.01, T)


def test_unknown_scheme(Q):
    with pytest.raises(ValueError):
        slflow.step_sl(Q, 0.01, T, scheme="euler")


def test_magnetic_laplacian_gauge_covariance():
    # D_A(e^{i chi} f) = e^{i chi} D_{A - d chi} f for a smooth gauge chi
    from hypslab.hgeom import gradient
    g = build_grid(64, 64, 4.0)
    f = np.exp(-g.R**2) * (1 + 0.2j * g.R * np.cos(g.TH))
    chi = 0.3 * np.exp(-g.R**2) * g.R * np.sin(g.TH)
    A = np.zeros((2,) + g.shape)
    A[1] = 0.2 * np.tanh(g.R) * np.exp(-g.R**2 / 4)
    lhs = slflow.magnetic_laplacian(g, np.exp(1j * chi) * f, A, boundary=0.0)
    rhs = np.exp(1j * chi) * slflow.magnetic_laplacian(g, f, A + gradient(g, chi, boundary=0.0), boundary=0.0)
    far = (g.r > 0.3) & (g.r < 3.0)
    assert np.max(np.abs(lhs - rhs)[far]) < 5e-3
