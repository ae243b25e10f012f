import numpy as np
import pytest

from pathctl.helpers.constants import N_LADDER, RESIDUAL_LADDER
from pathctl.helpers.errors import DimensionMismatchError, PlayerIndexError
from pathctl.paths import SampledPath
from pathctl.game import (
    GameFeedbackPolicy,
    GameParams,
    default_deviations,
    game_feedback,
    game_hjb_residual,
    game_probe_residual,
    game_value,
    n_ladder,
    nash_deviation_check,
    solve_e_system,
    surface_gap,
)
from pathctl.simulation import SimConfig
from pathctl.solver import SolverGrid, residual_ladder, solve_f_system
from pathctl.helpers.constants import REFERENCE_PARAMS
from tests.helpers import CLOSE_IN_VALUE


def game_params(n_players: int, **overrides) -> GameParams:
    return GameParams(**{**REFERENCE_PARAMS, **overrides}, n_players=n_players)


@pytest.fixture(scope="module")
def game():
    params = game_params(3)
    return solve_e_system(params, SolverGrid.for_params(params))


def histories(s, t: float, columns) -> SampledPath:
    times = t - s.params.tau + s.dt * np.arange(s.delay_steps + 1)
    return SampledPath(t0=times[0], dt=s.dt, values=np.column_stack([f(times) for f in columns]))


WAVES = [lambda x: np.sin(4 * x), lambda x: 0.5 * np.cos(9 * x), lambda x: x - 0.2]


def test_game_params_need_two_players():
    with pytest.raises(ValueError):
        game_params(1)
    assert game_params(4).single_agent().model_dump() == REFERENCE_PARAMS


def test_game_surfaces_invariants(game):
    assert game.kind == "game"
    assert game.coupling == CLOSE_IN_VALUE(2.0 / 3.0, 1e-15)
    assert all(game.invariant_flags().values())
    assert game.e0 is game.f0


def test_zero_game_has_zero_surfaces():
    params = game_params(5, q=0.0, eps=0.0)
    assert solve_e_system(params, SolverGrid.for_params(params)).max_abs() <= 1e-12


def test_equal_players_do_nothing(game):
    z = histories(game, 0.4, [WAVES[0]] * 3)
    for i in range(3):
        assert game_feedback(game, i, 0.4, [0.7, 0.7, 0.7], z) == CLOSE_IN_VALUE(0.0, 1e-12)


def test_zero_game_feedback_vanishes():
    params = game_params(3, q=0.0, eps=0.0)
    s = solve_e_system(params, SolverGrid.for_params(params))
    z = histories(s, 0.4, WAVES)
    assert game_feedback(s, 1, 0.4, [1.0, -2.0, 0.5], z) == 0.0
    assert game_hjb_residual(s, 1, 0.4, [1.0, -2.0, 0.5], z) == 0.0


def test_two_players_act_antisymmetrically():
    params = game_params(2)
    s = solve_e_system(params, SolverGrid.for_params(params))
    z = histories(s, 0.3, [np.zeros_like] * 2)
    first = game_feedback(s, 0, 0.3, [1.2, -1.2], z)
    second = game_feedback(s, 1, 0.3, [1.2, -1.2], z)
    assert first != 0.0
    assert first == CLOSE_IN_VALUE(-second, 1e-14)


def test_zero_history_feedback_is_proportional_to_deviation(game):
    n = game.time_index(0.3)
    y = np.array([1.0, -0.5, 2.0])
    z = histories(game, 0.3, [np.zeros_like] * 3)
    gain = game.params.q + game.coupling * (game.e0[n] + game.e1[n, -1])
    for i in range(3):
        assert game_feedback(game, i, 0.3, y, z) == CLOSE_IN_VALUE(gain * (y.mean() - y[i]), 1e-12)


def test_game_value_uses_deviation_from_mean(game):
    z = histories(game, 0.2, [np.zeros_like] * 3)
    n = game.time_index(0.2)
    y = [1.0, 2.0, 3.0]
    assert game_value(game, 0, 0.2, y, z) == CLOSE_IN_VALUE(0.5 * game.e0[n] + game.e3[n], 1e-14)


def test_player_checks(game):
    z = histories(game, 0.2, WAVES)
    with pytest.raises(PlayerIndexError):
        game_feedback(game, 3, 0.2, [0.0, 0.0, 0.0], z)
    with pytest.raises(DimensionMismatchError):
        game_feedback(game, 0, 0.2, [0.0, 0.0], z)


def test_residual_is_exchangeable(game):
    t = 0.5
    y = np.array([0.3, -1.0, 0.5])
    z = histories(game, t, WAVES)
    swap = [1, 0, 2]
    swapped = SampledPath(t0=z.t0, dt=z.dt, values=z.values[:, swap])
    assert game_hjb_residual(game, 0, t, y, z) == CLOSE_IN_VALUE(game_hjb_residual(game, 1, t, y[swap], swapped), 1e-10)
    assert game_feedback(game, 2, t, y, z) == CLOSE_IN_VALUE(game_feedback(game, 2, t, y[swap], swapped), 1e-12)


def test_gap_to_single_agent_shrinks_with_players():
    params = game_params(2)
    grid = SolverGrid.for_params(params)
    gaps = [gap for _, gap in n_ladder(params, grid, N_LADDER)]
    assert all(later < earlier for earlier, later in zip(gaps, gaps[1:]))
    assert gaps[-1] <= 0.25 * gaps[0]


def test_surface_gap_of_identical_systems(game):
    single = solve_f_system(game.params.single_agent(), game.grid)
    assert surface_gap(single, single) == 0.0
    assert surface_gap(game, single) > 0.0


def test_equilibrium_as_deviation_has_no_gap(game):
    cfg = SimConfig(n_paths=200, dt_sim=game.dt, y0=[1.0, 0.0, -0.5])
    report = nash_deviation_check(game, game.params, cfg, 1, [GameFeedbackPolicy(game)])
    assert report.estimates[0].mean == report.equilibrium.mean
    assert report.n_players == 3 and report.player == 1
    with pytest.raises(PlayerIndexError):
        nash_deviation_check(game, game.params, cfg, 5, [])


@pytest.mark.slow
@pytest.mark.parametrize("n_players", [3, 10])
def test_game_residual_converges(n_players):
    params = game_params(n_players)
    table = residual_ladder(
        lambda grid: solve_e_system(params, grid, 1.0),
        game_probe_residual,
        params,
        RESIDUAL_LADDER,
        n_probes=50,
        seed=0,
        n_players=n_players,
    )
    assert table.slope >= 0.9


@pytest.mark.slow
def test_nash_deviations_do_not_pay():
    params = game_params(10)
    s = solve_e_system(params, SolverGrid.for_params(params))
    cfg = SimConfig(n_paths=10_000, dt_sim=s.dt, y0=1.0)
    report = nash_deviation_check(s, params, cfg, 0, default_deviations(GameFeedbackPolicy(s)), threads=4)
    assert report.passed, report.flags

    costs = [record.mean for record in report.equilibrium_costs]
    spread = 3 * np.sqrt(2) * max(record.stderr for record in report.equilibrium_costs)
    assert max(costs) - min(costs) <= 2 * spread


@pytest.mark.slow
def test_nash_deviations_do_not_pay_from_spread_states():
    params = game_params(10)
    s = solve_e_system(params, SolverGrid.for_params(params))
    cfg = SimConfig(n_paths=10_000, dt_sim=s.dt, y0=np.linspace(-1.0, 1.0, 10).tolist())
    report = nash_deviation_check(s, params, cfg, 0, default_deviations(GameFeedbackPolicy(s)), threads=4)
    assert report.passed, report.flags
