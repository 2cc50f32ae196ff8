import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hypslab import hspec


def legendre_oracle(lam, r):
    # psi_lam(r) = P_{-1/2 + i lam}(cosh r), evaluated independently by mpmath
    return float(mp.re(mp.legenp(-0.5 + 1j * lam, 0, mp.cosh(r), type=3)))


@pytest.mark.parametrize("lam", [0.0, 0.5, 1.0, 2.0, 8.0])
@pytest.mark.parametrize("r", [0.1, 1.0, 5.0, 10.0])
def test_spherical_function_matches_legendre_oracle(lam, r):
    ref = legendre_oracle(lam, r)
    assert abs(hspec.spherical_function(lam, r) - ref) <= 1e-12 * max(1.0, abs(ref)) + 1e-14


def test_value_at_origin_exactly_one():
    assert np.all(hspec.spherical_function(np.array([0.0, 0.5, 3.0, 40.0]), 0.0) == 1.0)


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_ode_residual(lam):
    assert max(abs(hspec.ode_residual(lam, r)) for r in np.linspace(0.1, 10, 12)) <= 1e-8


def test_c_function_closed_form_and_density():
    lam = np.array([0.1, 0.7, 2.0, 5.0])
    c = hspec.c_function(lam)
    ref = np.array([complex(mp.gamma(1j * x) / (mp.sqrt(mp.pi) * mp.gamma(1j * x + 0.5))) for x in lam])
    assert np.max(np.abs(c - ref) / np.abs(ref)) < 1e-12
    assert np.max(np.abs(np.abs(c) ** -2 - hspec.plancherel_density(lam)) / hspec.plancherel_density(lam)) < 1e-12


def test_c_function_pole():
    with pytest.raises(ZeroDivisionError):
        hspec.c_function(0.0)


def test_phi_constant_calibration():
    assert abs(hspec.calibrate_phi_constant() - hspec.PHI_CONST) < 1e-12
    assert abs(hspec.PLANCHEREL_CONST - 1 / (2 * math.pi**2)) < 1e-15


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_harish_chandra_series_matches_integral(lam):
    r = np.linspace(2.0, 10.0, 17)
    ref = np.array([legendre_oracle(lam, x) for x in r])
    assert np.max(np.abs(hspec.hc_expansion(lam, r, 25) - ref) / np.abs(ref)) <= 1e-6


def test_gamma_recurrence_exact_series_solution():
    # Phi_lam(r) solves the radial ODE; check with high-precision differences
    lam, r, h = 1.3, 3.0, 1e-3
    vals = [complex(hspec._phi(lam, r + k * h, 40, 1.0)) for k in (-1, 0, 1)]
    d1 = (vals[2] - vals[0]) / (2 * h)
    d2 = (vals[2] - 2 * vals[1] + vals[0]) / h**2
    res = d2 + d1 / math.tanh(r) + (lam**2 + 0.25) * vals[1]
    assert abs(res) < 1e-5 * abs(vals[1])


def test_spherical_table_switches_consistently():
    lam = np.array([0.01, 0.5, 3.0])
    r = np.array([0.3, 1.5, 7.0])
    tab = hspec.spherical_table(lam, r)
    ref = np.array([[legendre_oracle(a, b) for b in r] for a in lam])
    assert np.max(np.abs(tab - ref)) < 1e-10


@pytest.fixture(scope="module")
def transform():
    r = hspec.midpoint_radii(12.0, 3000)
    return r, hspec.RadialTransform(r)


def test_round_trip_and_parseval(transform):
    r, tr = transform
    f = np.exp(-r**2)
    coef = tr.forward(f)
    assert np.max(np.abs(tr.inverse(coef) - f)) < 1e-6
    n1, n2 = tr.l2_norm_sq(f), tr.spectral_l2_norm_sq(coef)
    assert abs(n1 - n2) / n1 < 1e-6


def test_transform_of_gaussian_against_direct_quadrature(transform):
    r, tr = transform
    f = np.exp(-r**2)
    lam = 1.5
    direct = mp.quad(lambda x: 2 * mp.pi * mp.exp(-x**2) * mp.re(mp.legenp(-0.5 + 1.5j, 0, mp.cosh(x), type=3))
                     * mp.sinh(x), [0, 2, 6])
    assert abs(tr.evaluate(tr.forward(f), lam) - float(direct)) < 1e-7


def test_free_propagator_unitary_spectrally(transform):
    r, tr = transform
    f = np.exp(-(r / 0.7) ** 2)
    u = hspec.free_propagator_radial(tr, f, 0.5)
    n0, n1 = tr.l2_norm_sq(f), tr.l2_norm_sq(u)
    assert abs(n1 - n0) / n0 < 1e-5


def test_free_propagator_t0_identity(transform):
    r, tr = transform
    f = np.exp(-r**2)
    assert np.max(np.abs(hspec.free_propagator_radial(tr, f, 0.0) - f)) < 1e-6


@given(x=st.floats(-3.0, 3.0))
def test_cutoffs_partition_unity(x):
    assert abs(hspec.chi_low(x) + hspec.chi_high(x) - 1) < 1e-15
    assert 0 <= hspec.chi_low(x) <= 1


def test_cutoff_supports():
    assert hspec.chi_low(1.99) == 1.0 and hspec.chi_low(4.01) == 0.0


def test_kernel_budget_error():
    with pytest.raises(hspec.BudgetError):
        hspec.build_kernel(64.0, 0, "high", np.linspace(0, 32, 4), max_nodes=10_000)


def test_kernel_rejects_bad_arguments():
    with pytest.raises(ValueError):
        hspec.build_kernel(0.5, 0, "low", [0.0])
    with pytest.raises(ValueError):
        hspec.build_kernel(1.0, 0.3, "low", [0.0])


def test_heat_bound_constant_finite(transform):
    r, tr = transform
    rep = hspec.heat_kernel_bound_check(tr, np.exp(-r**2), 0.5, np.geomspace(0.01, 5, 20))
    assert math.isfinite(rep.constant) and rep.long_rate > 0
