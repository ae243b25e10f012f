"""
Symmetric N-player delayed game.

Player i is penalised on its distance u_i = mean(y) - y_i to the average state and
uses the window w_i = mean(z) - z_i of control differences. Its value functional has the
single-agent quadratic form in (u_i, w_i) with coefficients e0..e3; matching monomials
in the game HJB equation gives the same marching system with coupling c_N = 1 - 1/N
(see docs/game_coefficient_system.md).
"""
from typing import List, Sequence, Tuple

import numpy as np

from pathctl.helpers.constants import N_LADDER, RESIDUAL_LADDER
from pathctl.helpers.errors import DimensionMismatchError, GridAlignmentError, PlayerIndexError
from pathctl.helpers.logger import LOGGER
from pathctl.paths.core import SampledPath
from pathctl.solver.convergence import CrossFactorSelection, Probe, select_by_residual
from pathctl.solver.lq_delay import control_window, quadratic_form, solve_f_system, space_derivative, time_derivative
from pathctl.solver.marching import CouplingCoefficients, march_backward
from pathctl.solver.models import GameParams, LQParams, SolverGrid
from pathctl.solver.surfaces import GameSurfaces, Surfaces


def solve_e_system(params: GameParams, grid: SolverGrid, cross_factor: float = 1.0) -> GameSurfaces:
    coupling = 1.0 - 1.0 / params.n_players
    LOGGER.info(f"Solving the {params.n_players}-player game system on dt={grid.dt}, kappa={cross_factor}")
    e0, e1, e2, e3 = march_backward(params, grid, CouplingCoefficients(coupling=coupling, cross_factor=cross_factor))
    return GameSurfaces(e0, e1, e2, e3, grid=grid, params=params, cross_factor=cross_factor, n_players=params.n_players)


def deviations_from_mean(s: GameSurfaces, t: float, y: Sequence[float], z: SampledPath) -> Tuple[np.ndarray, np.ndarray]:
    """u of shape (N,) and w of shape (M, N)."""
    y = np.asarray(y, dtype=float)
    if y.shape != (s.n_players,):
        raise DimensionMismatchError(f"Expected {s.n_players} states, got shape {y.shape}")
    if z.dim != s.n_players:
        raise DimensionMismatchError(f"Expected a {s.n_players}-dimensional control history, got {z.dim}")
    window = control_window(s, t, z).reshape(s.delay_steps, s.n_players)
    return y.mean() - y, window.mean(axis=1, keepdims=True) - window


def game_feedback_coefficients(s: GameSurfaces, n: int) -> Tuple[float, np.ndarray]:
    """Gain K and kernel G with a_i = K u_i + dt * sum G w_i."""
    m = s.delay_steps
    gain = s.params.q + s.coupling * (s.f0[n] + s.f1[n, m])
    kernel = s.coupling * (s.f1[n, :m] + 2.0 * s.f2[n, :m, m])
    return float(gain), kernel


def all_feedback(s: GameSurfaces, n: int, u: np.ndarray, w: np.ndarray) -> np.ndarray:
    m, dt = s.delay_steps, s.dt
    own = 1.0 / s.n_players - 1.0
    p = own * (s.f0[n] * u + dt * s.f1[n, :m] @ w)
    through_control = u * s.f1[n, m] + 2.0 * dt * s.f2[n, :m, m] @ w
    return s.params.q * u - p - own * through_control


def _check_player(s: GameSurfaces, i: int) -> None:
    if not 0 <= i < s.n_players:
        raise PlayerIndexError(f"Player {i} is out of range for {s.n_players} players")


def game_feedback(s: GameSurfaces, i: int, t: float, y: Sequence[float], z: SampledPath) -> float:
    _check_player(s, i)
    u, w = deviations_from_mean(s, t, y, z)
    return float(all_feedback(s, s.time_index(t), u, w)[i])


def game_value(s: GameSurfaces, i: int, t: float, y: Sequence[float], z: SampledPath) -> float:
    _check_player(s, i)
    u, w = deviations_from_mean(s, t, y, z)
    return quadratic_form(s, s.time_index(t), u[i], w[:, i])


def game_hjb_residual(s: GameSurfaces, i: int, t: float, y: Sequence[float], z: SampledPath) -> float:
    """Left side of player i's HJB equation with every player on the feedback law."""
    _check_player(s, i)
    n = s.time_index(t)
    u, w = deviations_from_mean(s, t, y, z)
    actions = all_feedback(s, n, u, w)
    delayed = control_window(s, t, z).reshape(s.delay_steps, s.n_players)[0]
    weights = 1.0 / s.n_players - np.eye(s.n_players)[i]

    params = s.params
    p = space_derivative(s, n, u[i], w[:, i])
    current = actions.mean() - actions[i]
    value = time_derivative(s, n, u[i], w[:, i], current=current)
    value += np.sum(0.5 * params.sigma ** 2 * weights ** 2 * s.f0[n] + (actions - delayed) * weights * p)
    value += 0.5 * actions[i] ** 2 - params.q * actions[i] * u[i] + 0.5 * params.eps * u[i] ** 2
    return float(value)


def game_probe_residual(s: GameSurfaces, probe: Probe) -> float:
    return game_hjb_residual(s, probe.player, probe.t, probe.y, probe.z)


def select_game_cross_factor(
    params: GameParams,
    ladder: Sequence[int] = RESIDUAL_LADDER,
    n_probes: int = 20,
    seed: int = 0,
) -> CrossFactorSelection:
    return select_by_residual(
        lambda grid, kappa: solve_e_system(params, grid, kappa),
        game_probe_residual,
        params,
        ladder,
        n_probes,
        seed,
        n_players=params.n_players,
    )


def surface_gap(game: Surfaces, single: Surfaces) -> float:
    if not game.grid.matches(single.grid):
        raise GridAlignmentError(f"Surfaces live on different grids: {game.grid} vs {single.grid}")
    return float(max(
        np.max(np.abs(game.f0 - single.f0)),
        np.max(np.abs(game.f1 - single.f1)),
        np.max(np.abs(game.f2 - single.f2)),
        np.max(np.abs(game.f3 - single.f3)),
    ))


def n_ladder(
    params: LQParams,
    grid: SolverGrid,
    players: Sequence[int] = N_LADDER,
    cross_factor: float = 1.0,
) -> List[Tuple[int, float]]:
    """Sup-norm gap between each N-player system and the single-agent one."""
    single_params = params.single_agent() if isinstance(params, GameParams) else params
    single = solve_f_system(single_params, grid, cross_factor)
    gaps = []
    for n_players in players:
        game = solve_e_system(GameParams(**single_params.model_dump(), n_players=n_players), grid, cross_factor)
        gaps.append((n_players, surface_gap(game, single)))
    LOGGER.info(f"Gap to the single-agent surfaces by number of players: {gaps}")
    return gaps
