import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from targetzone.closed_form import ClosedForm, log_psi_unchecked
from targetzone.model import DomainError, ModelParams


def levy_value(beta, sigma, t):
    """(1/beta) log E[exp(beta sigma sqrt(t) |Z|)] by quadrature over the normal density."""
    s = beta * sigma * math.sqrt(t)
    mean, _ = quad(lambda x: 2.0 * math.exp(s * x - 0.5 * x * x) / math.sqrt(2 * math.pi), 0.0, np.inf)
    return math.log(mean) / beta


@pytest.fixture
def cf(unit):
    return ClosedForm(unit)


def test_psi_at_barrier(cf):
    oracle = 2.0 * math.exp(0.125) * 0.5 * math.erfc(-0.5 / math.sqrt(2.0))
    assert cf.psi(1.0, 0.0) == pytest.approx(oracle, rel=1e-14)
    # 1.5670592...; the five-digit figure 1.56707 quoted elsewhere is off by one in the last place
    assert cf.psi(1.0, 0.0) == pytest.approx(1.56707, rel=1e-5)


def test_psi_limits(cf):
    assert cf.psi(1.0, 60.0) == pytest.approx(1.0, abs=1e-15)
    assert cf.psi(1e-8, 0.5) == pytest.approx(1.0, abs=1e-15)


def test_value_at_barrier_matches_levy_quadrature(cf):
    # 0.898401530542578; the rounded figure 0.89881 quoted elsewhere is a slip
    assert cf.value_u(1.0, 0.0) == pytest.approx(levy_value(0.5, 1.0, 1.0), abs=1e-10)
    assert cf.value_u(1.0, 0.0) == pytest.approx(cf.barrier_value(1.0), abs=1e-13)


@pytest.mark.parametrize("sigma, gamma, kappa, t", [(2.0, 1.0, 0.5, 0.7), (0.5, 2.0, 3.0, 2.0)])
def test_barrier_value_other_parameters(sigma, gamma, kappa, t):
    cf = ClosedForm(ModelParams(sigma, gamma, kappa, 1.0, 1.0, 2.0))
    beta = cf.params.beta
    assert cf.value_u(t, 1.0) == pytest.approx(levy_value(beta, sigma, t), rel=1e-10)


def test_value_zero_at_time_zero(cf):
    np.testing.assert_array_equal(cf.value_u(0.0, np.array([0.0, 1.0, 5.0])), 0.0)


def test_far_field_value(cf):
    u = cf.value_u(1.0, 5.0)
    assert 0.0 < u < 1e-4


def test_far_field_value_against_band_local_time():
    # level 5 is essentially unreachable: band local time is zero on almost every path
    from targetzone import sim

    p = ModelParams()
    est = sim.brownian_local_time_mc(p, 1.0, 5.0, sim.SimConfig(n_steps=200, n_paths=20_000), weight=0.5)
    assert math.log(est.mean) / 0.5 < 1e-3


@pytest.mark.parametrize("t", [1e-6, 0.01, 0.5, 1.0])
def test_boundary_identity(cf, t):
    assert cf.du_dz(t, 0.0) == -1.0
    assert cf.dpsi_dx(t, 0.0) == pytest.approx(-0.5 * cf.psi(t, 0.0), rel=1e-12)


def test_du_dz_finite_difference(cf):
    h = 1e-5
    fd = (cf.value_u(1.0, 1.0 + h) - cf.value_u(1.0, 1.0 - h)) / (2 * h)
    assert cf.du_dz(1.0, 1.0) == pytest.approx(fd, abs=1e-6)


def test_dpsi_dt_finite_difference(cf):
    h = 1e-5
    fd = (cf.psi(1.0 + h, 1.0) - cf.psi(1.0 - h, 1.0)) / (2 * h)
    assert cf.dpsi_dt(1.0, 1.0) == pytest.approx(fd, abs=1e-6)


def test_du_dt_and_d2u_finite_difference(cf):
    h = 1e-4
    assert cf.du_dt(0.6, 0.3) == pytest.approx((cf.value_u(0.6 + h, 0.3) - cf.value_u(0.6 - h, 0.3)) / (2 * h), abs=1e-7)
    d2 = (cf.value_u(0.6, 0.3 + h) - 2 * cf.value_u(0.6, 0.3) + cf.value_u(0.6, 0.3 - h)) / h**2
    assert cf.d2u_dz2(0.6, 0.3) == pytest.approx(d2, abs=1e-5)


def test_du_dz_far_field(cf):
    assert -1e-12 < cf.du_dz(1.0, 10.0) < 0.0


def test_v_star_surface_monotone(cf):
    t, z = np.meshgrid(np.linspace(0, 0.99, 40), np.linspace(0, 3, 61), indexing="ij")
    v = cf.v_star(t, z)
    assert np.all(np.diff(v, axis=1) > 0)
    np.testing.assert_allclose(v[:, 0], -0.5, atol=1e-15)
    with pytest.raises(DomainError):
        cf.v_star(1.0, 0.5)


def test_domain_errors(cf):
    with pytest.raises(DomainError):
        cf.value_u(0.5, -0.1)
    with pytest.raises(DomainError):
        cf.du_dz(0.0, 0.5)
    with pytest.raises(DomainError):
        cf.psi(0.5, -1.0)


def test_pde_residual_analytic(cf):
    t, z = np.meshgrid(np.linspace(0.01, 1, 30), np.linspace(0, 8, 30), indexing="ij")
    assert np.max(np.abs(cf.pde_residual(t, z))) < 1e-12


def test_extreme_arguments_stay_finite():
    cf = ClosedForm(ModelParams(sigma=0.1, gamma=5.0, kappa=0.1, s0=0.0, horizon=50.0))
    t, z = np.meshgrid([1e-9, 1.0, 50.0], [0.0, 1e-3, 1.0, 1e3], indexing="ij")
    for values in (cf.value_u(t, z), cf.du_dz(t, z)):
        assert np.all(np.isfinite(values))
    assert np.all(cf.du_dz(t, z) >= -1.0)


@settings(max_examples=300, deadline=None)
@given(st.floats(1e-3, 5.0), st.floats(0.0, 20.0), st.floats(0.2, 3.0), st.floats(0.2, 3.0))
def test_properties(t, x, sigma, gamma):
    cf = ClosedForm(ModelParams(sigma=sigma, gamma=gamma, kappa=1.0, s0=0.0, horizon=5.0))
    assert cf.psi(t, x) >= 1.0
    assert -1.0 <= cf.du_dz(t, x) <= 0.0
    assert cf.value_u(t, x) >= 0.0
    # U grows with time-to-go and falls with distance
    assert cf.value_u(min(t * 1.1, 5.0), x) >= cf.value_u(t, x) - 1e-14
    assert cf.value_u(t, x + 0.1) <= cf.value_u(t, x) + 1e-14


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 2.0), st.floats(-3.0, 3.0))
def test_log_psi_continuous_across_barrier(t, x):
    p = ModelParams()
    assert np.isfinite(log_psi_unchecked(p, t, x))
