import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from targetzone.model import (
    ClosedFormOptimal,
    Constant,
    DomainError,
    ModelParams,
    ParameterError,
    Scaled,
    Tabulated,
    Zero,
    bilinear,
    eval_strategy,
    validate,
)


def test_unit_parameters_beta(unit):
    assert validate(unit) is unit
    assert unit.beta == 0.5


def test_beta_arithmetic():
    assert validate(ModelParams(2.0, 1.0, 0.5, 0.0, 1.0, 1.0)).beta == pytest.approx(0.25)


@pytest.mark.parametrize(
    "kwargs, fragment",
    [
        ({"s0": -0.1}, "s0 < c"),
        ({"sigma": 0.0}, "sigma"),
        ({"gamma": -1.0}, "gamma"),
        ({"kappa": 0.0}, "kappa"),
        ({"horizon": 0.0}, "horizon"),
        ({"c": float("nan")}, "c must be finite"),
    ],
)
def test_validate_rejects(kwargs, fragment):
    with pytest.raises(ParameterError, match=fragment):
        validate(ModelParams(**kwargs))


def test_zero_and_constant(unit):
    assert eval_strategy(Zero(), unit, 0.3, 2.0) == 0.0
    assert eval_strategy(Constant(0.7), unit, 0.3, 2.0) == 0.7
    assert Constant(0.7).growth_bound(unit) == 0.7


@pytest.mark.parametrize("t", [0.0, 0.25, 0.5, 0.999, 1.0])
def test_optimal_on_barrier(unit, t):
    assert eval_strategy(ClosedFormOptimal(), unit, t, 0.0) == pytest.approx(-0.5, abs=1e-15)


def test_optimal_far_field(unit):
    v = eval_strategy(ClosedFormOptimal(), unit, 0.5, 10.0)
    assert -1e-6 < v <= 0.0


def test_optimal_terminal_limit(unit):
    v = eval_strategy(ClosedFormOptimal(), unit, 1.0, np.array([0.0, 0.1, 1.0]))
    np.testing.assert_array_equal(v, [-0.5, 0.0, 0.0])


def test_scaled(unit):
    base = eval_strategy(ClosedFormOptimal(), unit, 0.2, 0.4)
    assert eval_strategy(Scaled(ClosedFormOptimal(), 1.5), unit, 0.2, 0.4) == pytest.approx(1.5 * base)


def test_domain_checks(unit):
    with pytest.raises(DomainError):
        eval_strategy(Zero(), unit, 0.5, -0.1)
    with pytest.raises(DomainError):
        eval_strategy(Zero(), unit, 1.5, 0.1)


def test_bilinear_exact_on_planes_and_clamped():
    xs, ys = np.linspace(0, 1, 5), np.linspace(0, 2, 7)
    table = 3.0 * xs[:, None] - 2.0 * ys[None, :] + 1.0
    assert bilinear(xs, ys, table, 0.33, 1.1) == pytest.approx(3 * 0.33 - 2 * 1.1 + 1)
    assert bilinear(xs, ys, table, 5.0, 9.0) == pytest.approx(3.0 - 4.0 + 1.0)


def test_tabulated_bounded(unit):
    table = np.array([[0.0, -1.0], [2.0, 0.5]])
    s = Tabulated(np.array([0.0, 1.0]), np.array([0.0, 1.0]), table)
    assert s.growth_bound(unit) == 2.0
    assert abs(eval_strategy(s, unit, 0.5, 50.0)) <= 2.0


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 50.0))
def test_optimal_within_growth_bound(t, z):
    p = ModelParams()
    v = eval_strategy(ClosedFormOptimal(), p, t, z)
    assert -ClosedFormOptimal().growth_bound(p) <= v <= 0.0
