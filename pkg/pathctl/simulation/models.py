from dataclasses import dataclass
from typing import Dict, List, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from pathctl.helpers.errors import DimensionMismatchError, GridAlignmentError
from pathctl.helpers.helpers import same_step
from pathctl.paths.core import SampledPath, values_at
from pathctl.solver.models import LQParams, SolverGrid


class SimulationDefaults:
    N_PATHS = 10_000
    SEED = 0
    THREADS = 1
    Y0 = 1.0


class SimConfig(BaseModel):
    """
    Monte Carlo settings. z_hist is the control history on [-tau, 0); a list of values
    in a config file is read as the last len(values) steps before 0. Missing history is zero.
    """
    model_config = ConfigDict(frozen=True, extra="forbid", arbitrary_types_allowed=True)

    n_paths: int = SimulationDefaults.N_PATHS
    seed: int = SimulationDefaults.SEED
    dt_sim: float
    y0: Union[float, List[float]] = SimulationDefaults.Y0
    z_hist: Optional[SampledPath] = None

    @model_validator(mode="before")
    @classmethod
    def history_from_values(cls, data):
        if isinstance(data, dict) and isinstance(data.get("z_hist"), (list, tuple)):
            values = data["z_hist"]
            if len(values) == 0:
                data = {**data, "z_hist": None}
            else:
                dt = float(data["dt_sim"])
                data = {**data, "z_hist": SampledPath(t0=-len(values) * dt, dt=dt, values=values)}
        return data

    @model_validator(mode="after")
    def check_settings(self) -> "SimConfig":
        if self.n_paths < 1:
            raise ValueError(f"n_paths must be at least 1, got {self.n_paths}")
        if not self.dt_sim > 0:
            raise ValueError(f"dt_sim must be positive, got {self.dt_sim}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.z_hist is not None:
            if not same_step(self.z_hist.dt, self.dt_sim):
                raise GridAlignmentError(f"z_hist step {self.z_hist.dt} differs from dt_sim={self.dt_sim}")
            if abs(self.z_hist.end_time + self.dt_sim) > 1e-9 * self.dt_sim:
                raise GridAlignmentError(f"z_hist must end at -dt_sim, ends at {self.z_hist.end_time}")
        return self

    def initial_states(self, n_players: int) -> np.ndarray:
        y0 = np.atleast_1d(np.asarray(self.y0, dtype=float))
        if y0.size == 1:
            return np.full(n_players, float(y0[0]))
        if y0.size != n_players:
            raise DimensionMismatchError(f"y0 has {y0.size} entries for {n_players} players")
        return y0

    def history_matrix(self, n_players: int, n_hist: int) -> np.ndarray:
        """Controls at steps -n_hist .. -1, shape (n_players, n_hist)."""
        if self.z_hist is None or n_hist == 0:
            return np.zeros((n_players, n_hist))
        times = self.dt_sim * np.arange(-n_hist, 0)
        values = values_at(self.z_hist, times)
        if values.shape[1] == 1:
            return np.repeat(values.T, n_players, axis=0)
        if values.shape[1] != n_players:
            raise DimensionMismatchError(f"z_hist has dimension {values.shape[1]} for {n_players} players")
        return values.T.copy()

    def history_path(self, tau: float) -> SampledPath:
        """Control history as a path on [-tau, 0) for evaluating value functionals at t=0."""
        n_hist = int(round(tau / self.dt_sim))
        values = self.history_matrix(1 if self.z_hist is None else self.z_hist.dim, n_hist).T
        return SampledPath(t0=-n_hist * self.dt_sim, dt=self.dt_sim, values=values)


@dataclass(frozen=True)
class CostEstimate:
    mean: float
    stderr: float
    n: int

    def __post_init__(self):
        if self.stderr < 0:
            raise ValueError(f"stderr must be non-negative, got {self.stderr}")

    @classmethod
    def from_samples(cls, costs: np.ndarray) -> "CostEstimate":
        costs = np.asarray(costs, dtype=float)
        n = costs.size
        stderr = float(costs.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        return cls(mean=float(costs.mean()), stderr=stderr, n=n)


class EstimateRecord(BaseModel):
    policy: str
    mean: float
    stderr: float
    n: int

    @classmethod
    def of(cls, policy: str, estimate: CostEstimate) -> "EstimateRecord":
        return cls(policy=policy, mean=estimate.mean, stderr=estimate.stderr, n=estimate.n)


class Report(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    flags: Dict[str, bool]
    seed: int
    params: LQParams
    grid: SolverGrid
    bands: Dict[str, float]

    @property
    def passed(self) -> bool:
        return all(self.flags.values())


class VerificationReport(Report):
    V: float
    estimates: List[EstimateRecord]
    strictly_worse: List[str]


class DppReport(Report):
    V: float
    u: float
    estimates: List[EstimateRecord]


class NashReport(Report):
    player: int
    n_players: int
    equilibrium: EstimateRecord
    equilibrium_costs: List[EstimateRecord]
    estimates: List[EstimateRecord]
