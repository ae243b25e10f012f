from typing import Optional

from pydantic import BaseModel, ConfigDict, model_validator

from pathctl.helpers.errors import GridAlignmentError
from pathctl.helpers.helpers import grid_steps, same_step


class SolverDefaults:
    STEPS_PER_DELAY = 10
    CROSS_FACTOR = 1.0
    N_PROBES = 50
    PROBE_SEED = 0


class LQParams(BaseModel):
    """Coefficients of the delayed linear-quadratic problem."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    q: float
    eps: float
    c: float
    horizon: float
    tau: float
    sigma: float

    @model_validator(mode="after")
    def check_ranges(self) -> "LQParams":
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if not 0 < self.tau <= self.horizon:
            raise ValueError(f"tau must lie in (0, horizon={self.horizon}], got {self.tau}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")
        if self.eps < 0:
            raise ValueError(f"eps must be non-negative, got {self.eps}")
        return self


class SolverGrid(BaseModel):
    """Time grid on [0, T] and delay grid on [-tau, 0] sharing the step dt."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    dt: float
    n_t: int
    n_theta: int

    @model_validator(mode="after")
    def check_sizes(self) -> "SolverGrid":
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.n_t < 2 or self.n_theta < 2:
            raise ValueError(f"Grid needs at least two nodes per axis, got n_t={self.n_t}, n_theta={self.n_theta}")
        return self

    @classmethod
    def for_params(cls, params: LQParams, dt: Optional[float] = None, steps_per_delay: Optional[int] = None) -> "SolverGrid":
        if dt is None:
            steps = steps_per_delay or SolverDefaults.STEPS_PER_DELAY
            dt = params.tau / steps
        n_theta = grid_steps(params.tau, dt, what="tau") + 1
        n_t = grid_steps(params.horizon, dt, what="horizon") + 1
        return cls(dt=dt, n_t=n_t, n_theta=n_theta)

    @property
    def delay_steps(self) -> int:
        return self.n_theta - 1

    def check_against(self, params: LQParams) -> None:
        if self.n_theta - 1 != grid_steps(params.tau, self.dt, what="tau"):
            raise GridAlignmentError(f"n_theta={self.n_theta} does not match tau={params.tau} with dt={self.dt}")
        if self.n_t - 1 != grid_steps(params.horizon, self.dt, what="horizon"):
            raise GridAlignmentError(f"n_t={self.n_t} does not match horizon={params.horizon} with dt={self.dt}")

    def matches(self, other: "SolverGrid") -> bool:
        return same_step(self.dt, other.dt) and self.n_t == other.n_t and self.n_theta == other.n_theta


class HamiltonianInputs(BaseModel):
    model_config = ConfigDict(frozen=True)

    p: float
    gamma: float
    alpha: float


class GameParams(LQParams):
    """Shared coefficients of the symmetric N-player game."""
    n_players: int

    @model_validator(mode="after")
    def check_players(self) -> "GameParams":
        if self.n_players < 2:
            raise ValueError(f"A game needs at least two players, got n_players={self.n_players}")
        return self

    def single_agent(self) -> LQParams:
        return LQParams(**self.model_dump(exclude={"n_players"}))
