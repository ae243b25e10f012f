from abc import ABC

import numpy as np

from pathctl.helpers.constants import GRID_TOLERANCE
from pathctl.helpers.errors import GridAlignmentError
from pathctl.helpers.helpers import same_step
from pathctl.paths.core import SampledPath
from pathctl.simulation.history import AdaptedHistory
from pathctl.solver.lq_delay import feedback_coefficients
from pathctl.solver.surfaces import Surfaces


class ControlPolicy(ABC):
    """An adapted control: maps what is known at a step to one action per path."""
    kind: str = "abstract"

    @property
    def label(self) -> str:
        return self.kind

    def act(self, history: AdaptedHistory, player: int) -> np.ndarray:
        raise NotImplementedError("ControlPolicy.act() must be overridden")

    def action_at(self, t: float, state: SampledPath, control: SampledPath, player: int = 0) -> float:
        return float(self.act(AdaptedHistory.from_paths(t, state, control), player)[0])

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.label})"


class ZeroPolicy(ControlPolicy):
    kind = "zero"

    def act(self, history: AdaptedHistory, player: int) -> np.ndarray:
        return np.zeros(history.n_paths)


class ConstantPolicy(ControlPolicy):
    kind = "constant"

    def __init__(self, value: float):
        self.value = float(value)

    @property
    def label(self) -> str:
        return f"constant {self.value:g}"

    def act(self, history: AdaptedHistory, player: int) -> np.ndarray:
        return np.full(history.n_paths, self.value)


class FeedbackPolicy(ControlPolicy):
    """The optimal feedback read off solved surfaces; needs the simulation step to match the solver step."""
    kind = "feedback"

    def __init__(self, surfaces: Surfaces):
        self.surfaces = surfaces
        coefficients = [feedback_coefficients(surfaces, n) for n in range(surfaces.grid.n_t)]
        self.gains = np.array([gain for gain, _ in coefficients])
        self.kernels = np.array([kernel for _, kernel in coefficients])

    def act(self, history: AdaptedHistory, player: int) -> np.ndarray:
        s = self.surfaces
        if not same_step(history.dt, s.dt):
            raise GridAlignmentError(f"Simulation step {history.dt} differs from the solver step {s.dt}")
        n = s.time_index(history.time)
        m = s.delay_steps
        window = history.control_window(history.step - m, history.step)[:, player, :]
        y = history.state_now()[:, player]
        return -self.gains[n] * y - s.dt * window @ self.kernels[n]


class PerturbedPolicy(ControlPolicy):
    """scale * base + shift."""
    kind = "perturbed"

    def __init__(self, base: ControlPolicy, shift: float = 0.0, scale: float = 1.0):
        self.base = base
        self.shift = float(shift)
        self.scale = float(scale)

    @property
    def label(self) -> str:
        label = self.base.label if self.scale == 1.0 else f"{self.scale:g}*{self.base.label}"
        return label if self.shift == 0.0 else f"{label}{self.shift:+g}"

    def act(self, history: AdaptedHistory, player: int) -> np.ndarray:
        return self.scale * self.base.act(history, player) + self.shift


class BridgePolicy(ControlPolicy):
    """head strictly before switch_time, tail from then on."""
    kind = "bridge"

    def __init__(self, head: ControlPolicy, tail: ControlPolicy, switch_time: float):
        self.head = head
        self.tail = tail
        self.switch_time = float(switch_time)

    @property
    def label(self) -> str:
        return f"{self.head.label} until {self.switch_time:g} then {self.tail.label}"

    def act(self, history: AdaptedHistory, player: int) -> np.ndarray:
        if history.time < self.switch_time - GRID_TOLERANCE * history.dt:
            return self.head.act(history, player)
        return self.tail.act(history, player)
