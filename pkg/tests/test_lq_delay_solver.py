import numpy as np
import pytest
from pydantic import ValidationError
from scipy.integrate import cumulative_trapezoid

from pathctl.helpers.constants import RESIDUAL_LADDER
from pathctl.helpers.errors import DomainMismatchError, GridAlignmentError, NumericalBlowUpError
from pathctl.paths import SampledPath
from pathctl.paths.calculus import delta_t, delta_x, delta_xx, predictability_check
from pathctl.paths.core import PathPair
from pathctl.solver import (
    HamiltonianInputs,
    LQParams,
    SolverGrid,
    classical_riccati,
    eval_derivatives,
    eval_value,
    hamiltonian,
    hjb_residual,
    load_surfaces,
    make_probes,
    modified_hamiltonian,
    optimal_control,
    probe_residual,
    residual_ladder,
    save_surfaces,
    select_by_residual,
    select_cross_factor,
    solve_f_system,
)
from tests.helpers import CLOSE_IN_VALUE, reference_params


@pytest.fixture(scope="module")
def params():
    return reference_params()


@pytest.fixture(scope="module")
def surfaces(params):
    return solve_f_system(params, SolverGrid.for_params(params))


def zero_history(s, t: float = 0.0) -> SampledPath:
    return SampledPath.constant(0.0, t0=t - s.params.tau, dt=s.dt, n_nodes=s.delay_steps + 1)


def wave_history(s, t: float, amplitude: float = 1.0) -> SampledPath:
    times = t - s.params.tau + s.dt * np.arange(s.delay_steps + 1)
    return SampledPath(t0=times[0], dt=s.dt, values=amplitude * np.sin(7.0 * times) + 0.3)


def test_params_validation():
    with pytest.raises(ValidationError):
        reference_params(tau=2.0)
    with pytest.raises(ValidationError):
        reference_params(sigma=-1.0)
    with pytest.raises(ValidationError):
        LQParams(q=1, eps=1, c=0, horizon=1, tau=0.1, sigma=1, extra=3)


def test_grid_for_params(params):
    grid = SolverGrid.for_params(params)
    assert grid.dt == CLOSE_IN_VALUE(0.005, 1e-15)
    assert (grid.n_t, grid.n_theta) == (201, 11)
    assert SolverGrid.for_params(params, steps_per_delay=5).n_theta == 6
    with pytest.raises(GridAlignmentError):
        SolverGrid.for_params(params, dt=0.03)


def test_reference_solution_is_finite_and_consistent(surfaces):
    assert np.isfinite(surfaces.max_abs())
    assert surfaces.invariant_flags() == {
        "kernel_symmetric": True,
        "final_conditions": True,
        "delay_boundary_linear": True,
        "delay_boundary_kernel": True,
    }
    assert surfaces.f0[0] > 0


def test_zero_problem_has_zero_surfaces():
    s = solve_f_system(reference_params(q=0.0, eps=0.0, sigma=0.7), SolverGrid.for_params(reference_params()))
    assert s.max_abs() <= 1e-12


def test_f3_is_integrated_f0(surfaces, params):
    tail = cumulative_trapezoid(surfaces.f0[::-1], dx=surfaces.dt, initial=0.0)[::-1]
    assert surfaces.f3 == CLOSE_IN_VALUE(0.5 * params.sigma ** 2 * tail, 1e-10)


def test_riccati_blow_up_is_reported():
    with pytest.raises(NumericalBlowUpError) as info:
        solve_f_system(reference_params(c=-50.0), SolverGrid.for_params(reference_params()))
    assert info.value.node is not None
    assert 0.0 <= info.value.node < 1.0


def test_terminal_weight_keeps_final_condition():
    s = solve_f_system(reference_params(c=0.5), SolverGrid.for_params(reference_params()))
    assert s.invariant_flags()["final_conditions"]
    assert s.f1[-2, 0] == -s.f0[-2]
    z = wave_history(s, 1.0)
    assert eval_value(s, 1.0, 2.0, z) == CLOSE_IN_VALUE(1.0, 1e-14)


def test_value_at_horizon_vanishes_without_terminal_cost(surfaces):
    for y in (-1.5, 0.0, 2.0):
        assert eval_value(surfaces, 1.0, y, wave_history(surfaces, 1.0)) == 0.0


def test_value_with_zero_history(surfaces):
    expected = surfaces.f0[0] / 2 + surfaces.f3[0]
    assert eval_value(surfaces, 0.0, 1.0, zero_history(surfaces)) == CLOSE_IN_VALUE(expected, 1e-14)


def test_value_needs_enough_history(surfaces):
    short = SampledPath.constant(1.0, t0=0.4, dt=surfaces.dt, n_nodes=3)
    with pytest.raises(DomainMismatchError):
        eval_value(surfaces, 0.5, 1.0, short)
    with pytest.raises(GridAlignmentError):
        eval_value(surfaces, 0.0012, 1.0, zero_history(surfaces))


def test_derivatives_match_finite_differences(surfaces):
    t, y = 0.3, 0.8
    z = wave_history(surfaces, t)
    dx, dxx, _ = eval_derivatives(surfaces, t, y, z)
    assert dxx == surfaces.f0[surfaces.time_index(t)]

    value_of_state = lambda p: eval_value(surfaces, t, float(p.last[0]), z)
    state = SampledPath(t0=0.0, dt=surfaces.dt, values=[y])
    assert delta_x(value_of_state, state).value == CLOSE_IN_VALUE(dx, 1e-7)
    assert delta_xx(value_of_state, state).value == CLOSE_IN_VALUE(dxx, 1e-5)


def test_time_derivative_matches_flat_extension(surfaces):
    # Window starts and ends at zero, so the forward difference is exact on the grid
    t, y = 0.3, 0.8
    m = surfaces.delay_steps
    z = SampledPath(t0=t - surfaces.params.tau, dt=surfaces.dt, values=np.sin(np.pi * np.arange(m) / (m - 1)))

    value_of_history = lambda p: eval_value(surfaces, p.end_time + surfaces.dt, y, p)
    _, _, dt_value = eval_derivatives(surfaces, t, y, z)
    assert delta_t(value_of_history, z).value == CLOSE_IN_VALUE(dt_value, 1e-8)


def test_second_derivative_does_not_depend_on_state(surfaces):
    z = wave_history(surfaces, 0.5)
    assert eval_derivatives(surfaces, 0.5, -3.0, z)[1] == eval_derivatives(surfaces, 0.5, 4.0, z)[1]


def test_optimal_control_with_zero_history_is_state_feedback(surfaces, params):
    n = surfaces.time_index(0.2)
    gain = surfaces.f0[n] + surfaces.f1[n, -1] + params.q
    z = zero_history(surfaces, 0.2)
    assert optimal_control(surfaces, 0.2, 1.3, z) == CLOSE_IN_VALUE(-gain * 1.3, 1e-14)


def test_zero_problem_has_zero_control():
    s = solve_f_system(reference_params(q=0.0, eps=0.0), SolverGrid.for_params(reference_params()))
    assert optimal_control(s, 0.4, 2.0, wave_history(s, 0.4)) == 0.0
    assert hjb_residual(s, 0.4, 2.0, wave_history(s, 0.4)) == 0.0


def test_modified_hamiltonian_minimizer(surfaces):
    t, y = 0.35, 0.5
    z = wave_history(surfaces, t)
    alpha_hat = optimal_control(surfaces, t, y, z)
    grid = np.arange(-10.0, 10.0 + 5e-4, 1e-3)
    minimum, argmin = modified_hamiltonian(surfaces, t, y, z, grid)
    assert argmin == CLOSE_IN_VALUE(alpha_hat, 1e-3)

    at_zero, _ = modified_hamiltonian(surfaces, t, y, z, [0.0])
    assert minimum == CLOSE_IN_VALUE(at_zero - 0.5 * alpha_hat ** 2, 1e-6)
    assert minimum == CLOSE_IN_VALUE(hjb_residual(surfaces, t, y, z), 1e-6)


def test_modified_hamiltonian_singleton(surfaces):
    t, y, a = 0.35, 0.5, 0.7
    z = wave_history(surfaces, t)
    alpha_hat = optimal_control(surfaces, t, y, z)
    at_zero, _ = modified_hamiltonian(surfaces, t, y, z, [0.0])
    value, argmin = modified_hamiltonian(surfaces, t, y, z, [a])
    assert argmin == a
    assert value == CLOSE_IN_VALUE(at_zero + 0.5 * a * a - alpha_hat * a, 1e-10)
    with pytest.raises(ValueError):
        modified_hamiltonian(surfaces, t, y, z, [])


def test_hamiltonian_is_quadratic_in_action(params):
    z = SampledPath.constant(2.0, t0=-params.tau, dt=0.005, n_nodes=11)
    value = hamiltonian(params, 0.0, 1.0, z, HamiltonianInputs(p=0.5, gamma=3.0, alpha=1.0))
    # 0.5*3 + (1-2)*0.5 + 0.5 + 1 + 1
    assert value == CLOSE_IN_VALUE(3.5, 1e-14)


def test_value_functional_is_predictable(surfaces):
    t = 0.4
    z = wave_history(surfaces, t)
    state = SampledPath(t0=z.t0, dt=z.dt, values=np.full(z.n_nodes, 0.9))
    value = lambda pair: eval_value(surfaces, t, float(pair.state.last[0]), pair.control)
    assert predictability_check(value, PathPair(state, z), [0.5, -2.0])


def test_classical_riccati_matches_tanh():
    params = LQParams(q=0.0, eps=1.0, c=0.0, horizon=1.0, tau=0.1, sigma=0.0)
    grid = SolverGrid.for_params(params)
    times = grid.dt * np.arange(grid.n_t)
    assert classical_riccati(params, grid) == CLOSE_IN_VALUE(np.tanh(1.0 - times), 1e-7)


def test_surfaces_persist(tmp_path, surfaces):
    save_surfaces(surfaces, tmp_path / "run")
    header = (tmp_path / "run" / "f2.csv").read_text().splitlines()[0]
    assert header == "t,theta1,theta2,value"
    loaded = load_surfaces(tmp_path / "run")
    for name in ("f0", "f1", "f2", "f3"):
        assert np.array_equal(getattr(loaded, name), getattr(surfaces, name))
    assert loaded.cross_factor == surfaces.cross_factor
    assert loaded.params == surfaces.params

    save_surfaces(loaded, tmp_path / "again")
    for name in ("f0.csv", "f1.csv", "f2.csv", "f3.csv", "meta.json"):
        assert (tmp_path / "run" / name).read_bytes() == (tmp_path / "again" / name).read_bytes()


def test_load_surfaces_reports_missing_files(tmp_path, surfaces):
    save_surfaces(surfaces, tmp_path / "run")
    (tmp_path / "run" / "f1.csv").unlink()
    with pytest.raises(FileNotFoundError):
        load_surfaces(tmp_path / "run")
    with pytest.raises(FileNotFoundError):
        load_surfaces(tmp_path / "nothing")


def test_probes_stay_away_from_the_corner(params):
    probes = make_probes(params, 0.01, 0.0025, 30, seed=1)
    assert len(probes) == 30
    for probe in probes:
        assert 0.0 < probe.t <= params.horizon - 2 * params.tau + 1e-12
        assert probe.z.t0 == CLOSE_IN_VALUE(probe.t - params.tau, 1e-12)


def test_zero_problem_keeps_unit_cross_factor():
    selection = select_cross_factor(reference_params(q=0.0, eps=0.0), n_probes=5)
    assert selection.cross_factor == 1.0
    assert selection.steps_per_delay == RESIDUAL_LADDER
    assert selection.slopes == {"half": None, "one": None}


def test_cross_factor_selection_prefers_vanishing_residual(params):
    # kappa = 1 starts larger but shrinks with dt, kappa = 1/2 stalls at a smaller plateau
    residuals = {1.0: lambda dt: 0.5 * dt, 0.5: lambda dt: 1e-3 + 1e-6 * dt}
    selection = select_by_residual(
        lambda grid, kappa: (grid.dt, kappa),
        lambda s, probe: residuals[s[1]](s[0]),
        params,
        RESIDUAL_LADDER,
        n_probes=3,
        seed=0,
    )
    assert selection.residuals["one"][-1] > selection.residuals["half"][-1]
    assert selection.slopes["one"] == CLOSE_IN_VALUE(1.0, 1e-9)
    assert selection.slopes["half"] < 0.01
    assert selection.cross_factor == 1.0


def test_cross_factor_selection_needs_two_grids(params):
    with pytest.raises(ValueError):
        select_by_residual(lambda grid, kappa: None, lambda s, probe: 0.0, params, [10], n_probes=1, seed=0)


@pytest.mark.slow
def test_cross_factor_selected_by_residual(params):
    selection = select_cross_factor(params)
    assert selection.cross_factor == 1.0
    assert len(selection.residuals["one"]) == len(RESIDUAL_LADDER)
    assert selection.slopes["one"] >= 0.9
    assert selection.slopes["one"] > selection.slopes["half"]


@pytest.mark.slow
def test_residual_converges_at_first_order(params):
    table = residual_ladder(
        lambda grid: solve_f_system(params, grid, 1.0),
        probe_residual,
        params,
        RESIDUAL_LADDER,
        n_probes=50,
        seed=0,
    )
    residuals = [row.max_residual for row in table.rows]
    assert residuals[0] > residuals[1] > residuals[2]
    assert table.slope >= 0.9
