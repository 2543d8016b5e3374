import math

import numpy as np
import pytest
from scipy.integrate import quad

from targetzone import pde
from targetzone import regularized as R
from targetzone.closed_form import ClosedForm
from targetzone.model import ModelParams
from targetzone.sim import SimConfig, combined_se


def rv_at(params, eps, n_steps=1000, n_paths=5000, seed=20240611):
    return R.RegularizedValue(params, eps, SimConfig(n_steps=n_steps, n_paths=n_paths, seed=seed))


def test_kernel_basics():
    assert R.g_eps(0.01, 0.3, 0.3) == pytest.approx(1 / math.sqrt(2 * math.pi * 0.01))
    assert quad(lambda x: R.g_eps(0.01, x, 0.3), -2.0, 2.6, points=[0.3])[0] == pytest.approx(1.0, abs=1e-8)
    assert R.g_eps(0.01, 0.3 + 0.2, 0.3) == pytest.approx(R.g_eps(0.01, 0.3 - 0.2, 0.3), rel=1e-12)
    h = 1e-6
    assert R.dg_eps(0.1, 0.2) == pytest.approx((R.g_eps(0.1, 0.2 + h) - R.g_eps(0.1, 0.2 - h)) / (2 * h), rel=1e-7)


def test_resolution_guard(unit):
    with pytest.raises(R.ResolutionError):
        R.u_eps_mc(rv_at(unit, 1e-3, n_steps=100), 1.0, 0.5)
    with pytest.raises(ValueError):
        R.RegularizedValue(unit, 0.0)


def test_value_at_time_zero(unit):
    assert R.u_eps_mc(rv_at(unit, 1e-2), 0.0, 0.3).mean == 0.0


def test_symmetry(unit):
    rv = rv_at(unit, 1e-2, n_steps=500)
    up, down = R.u_eps_values(rv, 1.0, [0.5, -0.5])
    assert abs(up.mean - down.mean) <= 3 * combined_se(up, down)
    g_up, g_down = R.du_eps_dz_values(rv, 1.0, [0.5, -0.5])
    assert abs(g_up.mean + g_down.mean) <= 3 * combined_se(g_up, g_down)


def test_gradient_zero_at_barrier(unit):
    est = R.du_eps_dz_mc(rv_at(unit, 1e-2, n_steps=500), 1.0, 0.0)
    assert abs(est.mean) <= 3 * est.std_error


def test_gradient_finite_difference(unit):
    rv = rv_at(unit, 1e-2, n_steps=500)
    h = 1e-2
    lo, hi = R.u_eps_values(rv, 1.0, [0.4 - h, 0.4 + h])
    fd = (hi.mean - lo.mean) / (2 * h)
    est = R.du_eps_dz_mc(rv, 1.0, 0.4)
    # common random numbers make the difference far tighter than the marginal errors
    assert abs(est.mean - fd) <= 3 * math.hypot(est.std_error, combined_se(lo, hi) / (2 * h))


def test_small_eps_close_to_closed_form(unit):
    est = R.u_eps_mc(rv_at(unit, 1e-3, n_steps=4000, n_paths=10_000), 1.0, 0.5)
    assert abs(est.mean - ClosedForm(unit).value_u(1.0, 0.5)) <= max(3 * est.std_error, 0.05)


def test_v_star_eps(unit):
    rv = rv_at(unit, 1e-3, n_steps=4000, n_paths=10_000)
    assert R.v_star_eps(rv, 0.0, 0.5) == pytest.approx(ClosedForm(unit).v_star(0.0, 0.5), abs=0.05)
    at_c = R.du_eps_dz_mc(rv_at(unit, 1e-2, n_steps=500), 1.0, 0.0)
    assert abs(R.v_star_eps(rv_at(unit, 1e-2, n_steps=500), 0.0, 0.0)) <= 1.5 * at_c.std_error
    assert R.v_star_eps(rv_at(unit, 1e-2, n_steps=500, n_paths=200), 0.0, 10.0) == pytest.approx(0.0, abs=1e-12)


def test_v_star_eps_from_surface(unit):
    surface = pde.solve_hjb_eps(unit, 1e-2, pde.Grid1D.default(unit, 601, 1000))
    v = R.v_star_eps(rv_at(unit, 1e-2), 0.0, 0.0, surface=surface)
    assert v == 0.0
    assert R.v_star_eps(rv_at(unit, 1e-2), 0.5, 1.0, surface=surface) < 0.0


def test_occupation_identity_flat_path():
    path = np.zeros(101)
    lhs, rhs = R.occupation_identity(path, 0.01, 0.1, 0.2)
    assert lhs == pytest.approx(R.g_eps(0.1, 0.2))
    assert rhs == pytest.approx(lhs, rel=1e-12)


def test_occupation_identity_refines(unit):
    devs = [R.occupation_identity_check(rv_at(unit, 0.1, n_steps=n), 1.0, 0.0, 20, 1e-2) for n in (1000, 10_000)]
    assert devs[1] < 0.05
    assert devs[1] < devs[0]


def test_occupation_identity_far():
    lhs, rhs = R.occupation_identity(np.linspace(0, 0.1, 50), 0.02, 0.01, 20.0)
    assert lhs < 1e-300 and rhs < 1e-300


def test_singular_limit_unit_sigma(unit):
    z = np.array([0.0, 0.3, 2.0])
    np.testing.assert_allclose(R.singular_limit(unit, 1.0, z), ClosedForm(unit).value_u(1.0, z), rtol=1e-15)
    np.testing.assert_allclose(R.singular_limit(unit, 1.0, -z), R.singular_limit(unit, 1.0, z))


def test_singular_limit_other_sigma():
    # narrowing the kernel in the smoothed PDE approaches the rescaled limit, not the sigma = 1 formula
    p = ModelParams(sigma=2.0, gamma=1.0, kappa=1.0, s0=0.0)
    limit = float(R.singular_limit(p, 1.0, 0.0))
    errs = []
    for eps, nz in ((1e-2, 601), (2.5e-3, 1201), (6.25e-4, 2401)):
        s = pde.solve_hjb_eps(p, eps, pde.Grid1D.default(p, nz, 1000))
        errs.append(abs(float(s.at(1.0, 0.0)) - limit))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.01
    assert abs(ClosedForm(p).value_u(1.0, 0.0) - limit) > 1.0


def test_convergence_study_small(unit):
    cfg = SimConfig(n_steps=2000, n_paths=4000)
    table = R.convergence_study(unit, [1e-1, 1e-2], 1.0, [0.0, 0.5], cfg)
    assert table.decreasing()
    assert len(table.rows) == 4
    far = R.convergence_study(unit, [1e-2], 1.0, [10.0], cfg)
    assert far.sup_errors[1e-2] < 1e-6
    with pytest.raises(ValueError):
        R.convergence_study(unit, [1e-2, 1e-1], 1.0, [0.0], cfg)


def test_local_time_rms_slopes(unit):
    eps = [1e-1, 1e-2, 1e-3]
    rms = R.local_time_rms(unit, eps, 1.0, 0.0, SimConfig(n_steps=20_000, n_paths=500), band=0.02)
    assert np.all(np.diff(rms) < 0)
    assert np.all(R.loglog_slopes(eps, rms) >= 0.2)


def test_exponent_guard():
    p = ModelParams(gamma=40.0)
    with pytest.raises(FloatingPointError):
        R.u_eps_mc(rv_at(p, 1e-2, n_steps=500, n_paths=200), 1.0, 0.0)
