from typing import List, Sequence

import numpy as np

from pathctl.helpers.errors import GridAlignmentError, PlayerIndexError
from pathctl.helpers.helpers import same_step
from pathctl.helpers.logger import LOGGER
from pathctl.simulation.checks import BANDS, dominates
from pathctl.simulation.engine import CostModel, simulate_paths
from pathctl.simulation.history import AdaptedHistory
from pathctl.simulation.models import EstimateRecord, NashReport, SimConfig
from pathctl.simulation.policies import ControlPolicy, PerturbedPolicy, ZeroPolicy
from pathctl.game.solver import game_feedback_coefficients
from pathctl.solver.models import GameParams
from pathctl.solver.surfaces import GameSurfaces


class GameCost(CostModel):
    """Costs of every player measured against the average state."""

    def __init__(self, params: GameParams):
        self.params = params

    def running(self, actions: np.ndarray, states: np.ndarray) -> np.ndarray:
        p = self.params
        u = states.mean(axis=1, keepdims=True) - states
        return 0.5 * actions ** 2 - p.q * actions * u + 0.5 * p.eps * u ** 2

    def terminal(self, states: np.ndarray) -> np.ndarray:
        u = states.mean(axis=1, keepdims=True) - states
        return 0.5 * self.params.c * u ** 2


class GameFeedbackPolicy(ControlPolicy):
    """Equilibrium feedback of the game; the actions of all players are computed once per step."""
    kind = "equilibrium"

    def __init__(self, surfaces: GameSurfaces):
        self.surfaces = surfaces
        coefficients = [game_feedback_coefficients(surfaces, n) for n in range(surfaces.grid.n_t)]
        self.gains = np.array([gain for gain, _ in coefficients])
        self.kernels = np.array([kernel for _, kernel in coefficients])

    def _all_actions(self, history: AdaptedHistory) -> np.ndarray:
        s = self.surfaces
        if not same_step(history.dt, s.dt):
            raise GridAlignmentError(f"Simulation step {history.dt} differs from the solver step {s.dt}")
        if history.n_players != s.n_players:
            raise PlayerIndexError(f"Surfaces are for {s.n_players} players, history has {history.n_players}")
        n = s.time_index(history.time)
        m = s.delay_steps
        states = history.state_now()
        window = history.control_window(history.step - m, history.step)
        u = states.mean(axis=1, keepdims=True) - states
        w = window.mean(axis=1, keepdims=True) - window
        return self.gains[n] * u + s.dt * w @ self.kernels[n]

    def act(self, history: AdaptedHistory, player: int) -> np.ndarray:
        key = (id(self), history.step)
        if key not in history.memo:
            history.memo[key] = self._all_actions(history)
        return history.memo[key][:, player]


def default_deviations(equilibrium: ControlPolicy) -> List[ControlPolicy]:
    return [
        ZeroPolicy(),
        PerturbedPolicy(equilibrium, shift=0.5),
        PerturbedPolicy(equilibrium, scale=1.5),
    ]


def nash_deviation_check(
    s: GameSurfaces,
    params: GameParams,
    cfg: SimConfig,
    i: int,
    deviations: Sequence[ControlPolicy],
    threads: int = 1,
) -> NashReport:
    """Player i's cost at equilibrium and under each unilateral deviation, the others staying on equilibrium."""
    if not 0 <= i < params.n_players:
        raise PlayerIndexError(f"Player {i} is out of range for {params.n_players} players")
    equilibrium = GameFeedbackPolicy(s)
    cost = GameCost(params)
    profile = [equilibrium] * params.n_players

    result = simulate_paths(profile, cost, params, cfg, threads=threads)
    reference = result.estimate(i)
    equilibrium_costs = [EstimateRecord.of(f"player {j}", result.estimate(j)) for j in range(params.n_players)]

    flags = {}
    estimates = []
    for deviation in deviations:
        deviated = list(profile)
        deviated[i] = deviation
        estimate = simulate_paths(deviated, cost, params, cfg, threads=threads).estimate(i)
        estimates.append(EstimateRecord.of(deviation.label, estimate))
        flags[f"no_gain[{deviation.label}]"] = dominates(estimate, reference)

    LOGGER.info(f"Nash check for player {i}: J={reference.mean:.6f} +/- {reference.stderr:.6f}, flags={flags}")
    return NashReport(
        player=i,
        n_players=params.n_players,
        equilibrium=EstimateRecord.of(equilibrium.label, reference),
        equilibrium_costs=equilibrium_costs,
        estimates=estimates,
        flags=flags,
        seed=cfg.seed,
        params=params,
        grid=s.grid,
        bands=BANDS,
    )
