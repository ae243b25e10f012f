import numpy as np
import pytest

from pathctl.helpers.constants import ITO_LEVELS
from pathctl.helpers.errors import DomainMismatchError
from pathctl.paths import PathPair, brownian_path
from pathctl.paths.calculus import (
    DerivativeEstimate,
    DerivativeMethod,
    control_last_value,
    cylindrical,
    delta_t,
    delta_t_richardson,
    delta_x,
    delta_xx,
    elapsed_time,
    is_shrinking,
    ito_refinement_study,
    ito_residual,
    last_value,
    predictability_check,
    product,
    running_integral,
)
from tests.helpers import CLOSE_IN_VALUE, path, random_path

square = cylindrical(lambda t, y: y * y)


def test_derivative_estimate_needs_positive_step():
    with pytest.raises(ValueError):
        DerivativeEstimate(1.0, 0.0, DerivativeMethod.FORWARD_TIME)


def test_delta_t_examples():
    p = path([1.0, -2.0, 3.0], dt=0.1)
    assert delta_t(last_value, p).value == 0.0
    assert delta_t(running_integral, p).value == CLOSE_IN_VALUE(3.0, 1e-12)
    assert delta_t(elapsed_time, p).value == CLOSE_IN_VALUE(1.0, 1e-9)
    assert delta_t(last_value, p).method is DerivativeMethod.FORWARD_TIME


def test_delta_t_accepts_multiples_of_the_step():
    p = path([1.0, 2.0], dt=0.1)
    estimate = delta_t(running_integral, p, dt_step=0.3)
    assert estimate.step == 0.3
    assert estimate.value == CLOSE_IN_VALUE(2.0, 1e-12)


def test_space_derivatives_of_simple_functionals():
    p = path([0.5, 1.5, 2.0], dt=0.1)
    assert delta_x(last_value, p).value == CLOSE_IN_VALUE(1.0, 1e-9)
    assert delta_xx(last_value, p).value == CLOSE_IN_VALUE(0.0, 1e-6)
    assert delta_xx(square, p).value == CLOSE_IN_VALUE(2.0, 1e-5)
    assert delta_x(running_integral, p).value == 0.0
    assert delta_xx(running_integral, p).value == 0.0


def test_default_space_step_scales_with_path():
    assert delta_x(last_value, path([0.5])).step == 1e-4
    assert delta_x(last_value, path([-30.0])).step == CLOSE_IN_VALUE(3e-3, 1e-15)


def test_vector_paths_get_gradients():
    f = lambda p: float(p.last[0] * p.last[1])
    gradient = delta_x(f, path([[2.0, 3.0]])).value
    assert gradient == CLOSE_IN_VALUE(np.array([3.0, 2.0]), 1e-8)


def test_cylindrical_derivatives_match_analytic():
    # phi(t, y) = t^2 y + y^3 at t = 0.5, y = 2
    f = cylindrical(lambda t, y: t * t * y + y ** 3)
    p = path(np.linspace(0.0, 2.0, 501), dt=0.001)
    assert p.end_time == CLOSE_IN_VALUE(0.5, 1e-12)

    assert delta_t(f, p).value == CLOSE_IN_VALUE(2.0, 5e-3)
    assert delta_t_richardson(f, p).value == CLOSE_IN_VALUE(2.0, 1e-7)
    assert delta_x(f, p).value == CLOSE_IN_VALUE(12.25, 1e-6)
    assert delta_xx(f, p).value == CLOSE_IN_VALUE(12.0, 1e-4)


def test_forward_time_derivative_converges():
    f = cylindrical(lambda t, y: np.sin(3 * t) * y)
    errors = []
    for dt in (0.01, 0.001):
        p = path(np.ones(int(round(0.5 / dt)) + 1), dt=dt)
        errors.append(abs(delta_t(f, p).value - 3 * np.cos(1.5)))
    assert errors[1] < errors[0]


def test_ito_residual_of_last_value_telescopes():
    x, qv = brownian_path(1.0, 1.0, 0.01, seed=42)
    assert ito_residual(last_value, x, qv) == CLOSE_IN_VALUE(0.0, 1e-6)


def test_ito_residual_of_running_integral_vanishes_on_grid():
    x, qv = brownian_path(0.7, 1.0, 0.02, seed=3, y0=1.0)
    assert ito_residual(running_integral, x, qv) == CLOSE_IN_VALUE(0.0, 1e-9)


def test_ito_residual_needs_matching_grids():
    x, qv = brownian_path(1.0, 1.0, 0.1, seed=0)
    with pytest.raises(DomainMismatchError):
        ito_residual(last_value, x, path(qv.scalar[:-1], dt=0.1))


@pytest.mark.slow
@pytest.mark.parametrize("functional", [square, running_integral, product(last_value, running_integral)])
def test_ito_residual_shrinks_under_refinement(functional):
    medians = ito_refinement_study(functional, ITO_LEVELS, n_paths=100, seed=0)
    assert len(medians) == len(ITO_LEVELS)
    assert is_shrinking(medians)


def test_is_shrinking():
    assert is_shrinking([1.0, 0.5, 0.1])
    assert not is_shrinking([1.0, 0.5, 0.7])
    assert is_shrinking([1e-13, 1e-14, 1e-13])


def test_predictability_check():
    rng = np.random.default_rng(0)
    pair = PathPair(random_path(rng, 5), random_path(rng, 5))
    h_set = [0.1, -1.0, 10.0]
    assert predictability_check(lambda pp: running_integral(pp.control), pair, h_set)
    assert predictability_check(lambda pp: 4.0, pair, h_set)
    assert not predictability_check(control_last_value, pair, h_set)


@pytest.mark.parametrize("h_set", [[], [0.0]])
def test_predictability_check_rejects_bad_bumps(h_set):
    pair = PathPair(path([1.0]), path([1.0]))
    with pytest.raises(ValueError):
        predictability_check(control_last_value, pair, h_set)
