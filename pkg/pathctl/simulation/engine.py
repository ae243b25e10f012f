"""
Euler-Maruyama simulation of the delayed controlled system

    x_{k+1} = x_k + (a_k - a_{k-M}) dt + sigma sqrt(dt) xi_k,   M = tau / dt,

for one or several players, with costs accumulated by left Riemann sums.

Every path draws its noise from its own Philox stream keyed by (seed, path_id) and
chunks are reassembled in order, so results do not depend on the number of threads.
"""
from abc import ABC
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from pathctl.helpers.constants import MC_CHUNK_SIZE
from pathctl.helpers.errors import DomainMismatchError, NumericalBlowUpError
from pathctl.helpers.helpers import grid_steps
from pathctl.helpers.logger import LOGGER
from pathctl.simulation.history import AdaptedHistory
from pathctl.simulation.models import CostEstimate, SimConfig
from pathctl.simulation.policies import ControlPolicy
from pathctl.solver.models import LQParams

TerminalFunctional = Callable[[AdaptedHistory], np.ndarray]


class CostModel(ABC):
    """Running and terminal costs for every player, shapes (n_paths, n_players)."""

    def running(self, actions: np.ndarray, states: np.ndarray) -> np.ndarray:
        raise NotImplementedError("CostModel.running() must be overridden")

    def terminal(self, states: np.ndarray) -> np.ndarray:
        raise NotImplementedError("CostModel.terminal() must be overridden")


class LQCost(CostModel):
    def __init__(self, params: LQParams):
        self.params = params

    def running(self, actions: np.ndarray, states: np.ndarray) -> np.ndarray:
        p = self.params
        return 0.5 * actions ** 2 + p.q * actions * states + 0.5 * p.eps * states ** 2

    def terminal(self, states: np.ndarray) -> np.ndarray:
        return 0.5 * self.params.c * states ** 2


@dataclass(frozen=True, eq=False)
class SimulationResult:
    costs: np.ndarray
    terminal_states: np.ndarray
    states: Optional[np.ndarray] = None
    controls: Optional[np.ndarray] = None

    def estimate(self, player: int = 0) -> CostEstimate:
        return CostEstimate.from_samples(self.costs[:, player])


def path_noise(seed: int, path_id: int, n_steps: int, n_players: int) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, path_id])))
    return rng.standard_normal((n_steps, n_players))


def simulate_paths(
    policies: Sequence[ControlPolicy],
    cost: CostModel,
    params: LQParams,
    cfg: SimConfig,
    threads: int = 1,
    stop_time: Optional[float] = None,
    terminal: Optional[TerminalFunctional] = None,
    keep_paths: bool = False,
) -> SimulationResult:
    """
    Simulates all players together, player j following policies[j].

    With stop_time the simulation ends there and terminal (when given) replaces the
    terminal cost, receiving the history at the stopping step.
    """
    dt = cfg.dt_sim
    n_total = grid_steps(params.horizon, dt, what="horizon")
    n_hist = grid_steps(params.tau, dt, what="tau")
    n_stop = n_total if stop_time is None else grid_steps(stop_time, dt, what="stop time")
    if not 0 < n_stop <= n_total:
        raise DomainMismatchError(f"Stop time {stop_time} is outside (0, {params.horizon}]")

    n_players = len(policies)
    y0 = cfg.initial_states(n_players)
    history = cfg.history_matrix(n_players, n_hist)
    volatility = params.sigma * np.sqrt(dt)

    def run_chunk(bounds: Tuple[int, int]) -> SimulationResult:
        start, stop = bounds
        n = stop - start
        noise = np.stack([path_noise(cfg.seed, path_id, n_total, n_players) for path_id in range(start, stop)])
        states = np.zeros((n, n_players, n_stop + 1))
        states[:, :, 0] = y0
        controls = np.zeros((n, n_players, n_hist + n_stop))
        controls[:, :, :n_hist] = history
        costs = np.zeros((n, n_players))

        for k in range(n_stop):
            view = AdaptedHistory(states, controls, k, dt, n_hist)
            actions = np.column_stack([policy.act(view, j) for j, policy in enumerate(policies)])
            if not np.isfinite(actions).all():
                raise NumericalBlowUpError("Policy returned a non-finite action", node=k * dt)
            controls[:, :, n_hist + k] = actions
            costs += dt * cost.running(actions, states[:, :, k])
            drift = actions - controls[:, :, k]
            states[:, :, k + 1] = states[:, :, k] + drift * dt + volatility * noise[:, k, :]
            if not np.isfinite(states[:, :, k + 1]).all():
                raise NumericalBlowUpError("Simulated state blew up", node=(k + 1) * dt)

        if terminal is not None:
            costs += terminal(AdaptedHistory(states, controls, n_stop, dt, n_hist))
        else:
            costs += cost.terminal(states[:, :, n_stop])
        return SimulationResult(
            costs=costs,
            terminal_states=states[:, :, n_stop].copy(),
            states=states if keep_paths else None,
            controls=controls if keep_paths else None,
        )

    chunks = [(start, min(start + MC_CHUNK_SIZE, cfg.n_paths)) for start in range(0, cfg.n_paths, MC_CHUNK_SIZE)]
    LOGGER.debug(f"Simulating {cfg.n_paths} paths x {n_players} players over {n_stop} steps on {threads} threads")
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results: List[SimulationResult] = list(pool.map(run_chunk, chunks))

    return SimulationResult(
        costs=np.concatenate([r.costs for r in results]),
        terminal_states=np.concatenate([r.terminal_states for r in results]),
        states=np.concatenate([r.states for r in results]) if keep_paths else None,
        controls=np.concatenate([r.controls for r in results]) if keep_paths else None,
    )


def simulate_cost(policy: ControlPolicy, params: LQParams, cfg: SimConfig, threads: int = 1) -> CostEstimate:
    result = simulate_paths([policy], LQCost(params), params, cfg, threads=threads)
    estimate = result.estimate()
    LOGGER.info(f"Policy {policy.label}: J = {estimate.mean:.6f} +/- {estimate.stderr:.6f} over {estimate.n} paths")
    return estimate
