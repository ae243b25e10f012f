from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from pathctl.helpers.constants import CROSS_FACTORS, ROUNDOFF_FLOOR
from pathctl.helpers.logger import LOGGER
from pathctl.paths.core import SampledPath
from pathctl.solver.models import LQParams, SolverGrid
from pathctl.solver.surfaces import Surfaces


@dataclass(frozen=True, eq=False)
class Probe:
    """A randomized evaluation point: a time, one state per player and smooth control histories."""
    t: float
    y: np.ndarray
    z: SampledPath
    player: int = 0


ProbeResidual = Callable[[Surfaces, Probe], float]


def make_probes(
    params: LQParams,
    coarse_dt: float,
    sample_dt: float,
    n_probes: int,
    seed: int,
    n_players: int = 1,
) -> List[Probe]:
    """
    Probes at coarse grid times in (0, T - 2 tau], away from the corner region near T
    where the terminal and delay-boundary data meet.
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed])))
    nodes = coarse_dt * np.arange(1, int(round(params.horizon / coarse_dt)))
    safe = nodes[nodes <= params.horizon - 2 * params.tau + 1e-12]
    candidates = safe if safe.size else nodes

    fine_steps = int(round(params.tau / sample_dt))
    probes = []
    for _ in range(n_probes):
        t = float(candidates[rng.integers(candidates.size)])
        y = rng.uniform(-2.0, 2.0, size=n_players)
        amplitude = rng.uniform(0.5, 2.0, size=n_players)
        frequency = rng.uniform(2.0, 20.0, size=n_players)
        phase = rng.uniform(0.0, 2 * np.pi, size=n_players)
        offset = rng.uniform(-1.0, 1.0, size=n_players)
        times = t - params.tau + sample_dt * np.arange(fine_steps + 1)
        values = amplitude * np.sin(np.outer(times, frequency) + phase) + offset
        z = SampledPath(t0=t - params.tau, dt=sample_dt, values=values)
        probes.append(Probe(t=t, y=y, z=z, player=int(rng.integers(n_players))))
    return probes


def max_residual(s: Surfaces, residual: ProbeResidual, probes: Sequence[Probe]) -> float:
    return float(max(abs(residual(s, probe)) for probe in probes))


@dataclass(frozen=True)
class ConvergenceRow:
    dt: float
    max_residual: float
    slope: Optional[float] = None


@dataclass(frozen=True)
class ConvergenceTable:
    rows: List[ConvergenceRow]

    @property
    def slope(self) -> float:
        """Least-squares slope of log residual against log dt."""
        dts = np.array([row.dt for row in self.rows])
        residuals = np.array([row.max_residual for row in self.rows])
        if np.any(residuals <= ROUNDOFF_FLOOR):
            return float("nan")
        return float(np.polyfit(np.log(dts), np.log(residuals), 1)[0])

    def converges(self, min_slope: float) -> bool:
        if all(row.max_residual <= ROUNDOFF_FLOOR for row in self.rows):
            return True
        return self.slope >= min_slope


def residual_ladder(
    solve: Callable[[SolverGrid], Surfaces],
    residual: ProbeResidual,
    params: LQParams,
    ladder: Sequence[int],
    n_probes: int,
    seed: int,
    n_players: int = 1,
) -> ConvergenceTable:
    """Max residual over shared probes for each grid of the ladder (steps per delay, coarse to fine)."""
    ladder = sorted(ladder)
    grids = [SolverGrid.for_params(params, steps_per_delay=steps) for steps in ladder]
    probes = make_probes(params, grids[0].dt, grids[-1].dt, n_probes, seed, n_players)
    rows: List[ConvergenceRow] = []
    for grid in grids:
        value = max_residual(solve(grid), residual, probes)
        slope = None
        if rows and rows[-1].max_residual > ROUNDOFF_FLOOR and value > ROUNDOFF_FLOOR:
            slope = float(np.log(rows[-1].max_residual / value) / np.log(rows[-1].dt / grid.dt))
        rows.append(ConvergenceRow(dt=grid.dt, max_residual=value, slope=slope))
    return ConvergenceTable(rows)


@dataclass
class CrossFactorSelection:
    cross_factor: float
    residuals: Dict[str, List[float]]
    steps_per_delay: Tuple[int, ...]
    slopes: Dict[str, Optional[float]] = field(default_factory=dict)


def _ranking_slope(table: ConvergenceTable) -> float:
    # A residual already at roundoff has nothing left to converge
    if table.rows[-1].max_residual <= ROUNDOFF_FLOOR:
        return float("inf")
    slope = table.slope
    return float("-inf") if np.isnan(slope) else slope


def select_by_residual(
    solve: Callable[[SolverGrid, float], Surfaces],
    residual: ProbeResidual,
    params: LQParams,
    ladder: Sequence[int],
    n_probes: int,
    seed: int,
    n_players: int = 1,
) -> CrossFactorSelection:
    """
    Pick the cross factor whose residual vanishes fastest under refinement: the largest fitted
    log-log slope over the ladder, then the smaller residual on the finest grid, then kappa = 1.
    """
    if len(ladder) < 2:
        raise ValueError(f"Cross factor selection needs at least two grids, got {list(ladder)}")
    tables = {
        name: residual_ladder(
            lambda grid, kappa=kappa: solve(grid, kappa), residual, params, ladder, n_probes, seed, n_players
        )
        for name, kappa in CROSS_FACTORS.items()
    }
    best = min(
        CROSS_FACTORS,
        key=lambda name: (-_ranking_slope(tables[name]), tables[name].rows[-1].max_residual, -CROSS_FACTORS[name]),
    )
    residuals = {name: [row.max_residual for row in table.rows] for name, table in tables.items()}
    slopes = {name: None if np.isnan(table.slope) else table.slope for name, table in tables.items()}
    LOGGER.info(f"Cross factor residuals {residuals}, slopes {slopes}; selected {best} ({CROSS_FACTORS[best]})")
    return CrossFactorSelection(CROSS_FACTORS[best], residuals, tuple(sorted(ladder)), slopes)
