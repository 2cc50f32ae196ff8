import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hypslab.hgeom import ConfigurationError, build_grid
from hypslab.target import (constant_map, dirichlet_energy, holomorphic_map, make_spec,
                            poincare_disk_target, tension_field, verify_admissible)

T = poincare_disk_target()
HALF = make_spec("holomorphic", [0, 0.5])


def exact_energy(rmax, a=0.5):
    # holomorphic f = a z on the disk |z| < tanh(rmax/2) with rho = 2/(1-|w|^2):
    # E = int 4 a^2 / (1 - a^2 |z|^2)^2 dx dy = 4 pi (1 / (1 - a^2 R^2) - 1)
    R = math.tanh(rmax / 2)
    return 4 * math.pi * (1 / (1 - a**2 * R**2) - 1)


def test_constant_map_has_zero_energy_and_tension():
    g = build_grid(16, 16, 4.0)
    u = constant_map(g, 0.2 - 0.1j)
    assert dirichlet_energy(u, T) == 0.0
    assert np.max(np.abs(tension_field(u, T))) < 1e-12


def test_energy_converges_to_closed_form():
    errs = []
    for n in (32, 64):
        g = build_grid(n, n, 4.0)
        errs.append(abs(dirichlet_energy(holomorphic_map(HALF, g), T) - exact_energy(4.0)))
    assert errs[1] < errs[0] / 3
    assert errs[1] / exact_energy(4.0) < 1e-3


def test_energy_stable_under_refinement():
    e = [dirichlet_energy(holomorphic_map(HALF, build_grid(n, n, 6.0)), T) for n in (64, 128)]
    assert abs(e[0] - e[1]) / e[1] < 2e-3


def test_holomorphic_map_is_harmonic_to_second_order():
    sups = [float(np.max(np.abs(tension_field(holomorphic_map(HALF, build_grid(n, n // 2, 10.0)), T))))
            for n in (64, 128)]
    assert 3.0 < sups[0] / sups[1] < 5.0


def test_antiholomorphic_map_is_harmonic():
    spec = make_spec("antiholomorphic", [0, 0.4, 0.1])
    g = build_grid(96, 48, 6.0)
    assert np.max(np.abs(tension_field(holomorphic_map(spec, g), T))) < 1e-3


def test_bump_raises_energy():
    from hypslab.caloric import discrete_harmonic, perturbed_map

    g = build_grid(32, 32, 6.0)
    Q = discrete_harmonic(holomorphic_map(HALF, g), T, form="variational")
    e0 = dirichlet_energy(Q, T)
    for eps in (0.01, -0.02):
        assert dirichlet_energy(perturbed_map(Q, eps, 1.0, 0.3), T) > e0


def test_noncompact_image_rejected():
    with pytest.raises(ValueError, match="compact"):
        holomorphic_map(make_spec("holomorphic", [0, 1.0]), build_grid(16, 16, 4.0))


def test_target_scale_must_be_positive():
    with pytest.raises(ConfigurationError):
        poincare_disk_target(0.0)


@given(w=st.complex_numbers(max_magnitude=0.9, allow_nan=False, allow_infinity=False),
       scale=st.floats(0.2, 5.0))
def test_curvature_and_christoffel_closed_forms(w, scale):
    t = poincare_disk_target(scale)
    generic = type(t)(t.log_rho)
    arr = np.array([w])
    assert abs(t.gauss_curvature(arr)[0] + 1 / scale**2) < 1e-12
    assert abs(generic.gauss_curvature(arr)[0] - t.gauss_curvature(arr)[0]) < 1e-4 / scale**2
    assert abs(generic.christoffel(arr)[0] - t.christoffel(arr)[0]) < 1e-6 * (1 + abs(t.christoffel(arr)[0]))


def test_admissibility_of_half_z():
    g = build_grid(64, 32, 8.0)
    rep = verify_admissible(holomorphic_map(HALF, g), T)
    assert rep["passed"] and rep["er_dQ_sup"] > 0
