from typing import Any, Dict

import numpy as np

from pathctl.helpers.constants import GRID_TOLERANCE
from pathctl.helpers.errors import AdaptednessError, DomainMismatchError
from pathctl.helpers.helpers import grid_steps
from pathctl.paths.core import SampledPath, values_at


class AdaptedHistory:
    """
    What a policy may see at step k of a batch of simulated paths: states up to and
    including step k and controls strictly before it. Asking for anything later raises
    AdaptednessError.

    states has shape (n_paths, n_players, >= k + 1); controls has shape
    (n_paths, n_players, n_hist + >= k) with column n_hist + j holding the control of step j.
    """

    def __init__(self, states: np.ndarray, controls: np.ndarray, step: int, dt: float, n_hist: int):
        self._states = states
        self._controls = controls
        self.step = step
        self.dt = dt
        self.n_hist = n_hist
        # Per-step scratch space for policies that share work across players
        self.memo: Dict[Any, Any] = {}

    @property
    def time(self) -> float:
        return self.step * self.dt

    @property
    def n_paths(self) -> int:
        return self._states.shape[0]

    @property
    def n_players(self) -> int:
        return self._states.shape[1]

    def state_now(self) -> np.ndarray:
        return self._states[:, :, self.step].copy()

    def state_at(self, step: int) -> np.ndarray:
        if step > self.step:
            raise AdaptednessError(f"State of step {step} requested at step {self.step}")
        if step < 0:
            raise DomainMismatchError(f"States start at step 0, got {step}")
        return self._states[:, :, step].copy()

    def control_window(self, start: int, stop: int) -> np.ndarray:
        """Controls of steps start .. stop-1, shape (n_paths, n_players, stop - start); zero before the history."""
        if stop > self.step:
            raise AdaptednessError(f"Control of step {stop - 1} requested at step {self.step}")
        if start > stop:
            raise ValueError(f"Empty control window [{start}, {stop})")
        out = np.zeros((self.n_paths, self.n_players, stop - start))
        first = max(start, -self.n_hist)
        if first < stop:
            out[:, :, first - start:] = self._controls[:, :, self.n_hist + first:self.n_hist + stop]
        return out

    @classmethod
    def from_paths(cls, t: float, state: SampledPath, control: SampledPath) -> "AdaptedHistory":
        """A single-path history at time t from a state path on [0, t] and a control path before t."""
        dt = state.dt
        if abs(state.t0) > GRID_TOLERANCE * dt:
            raise DomainMismatchError(f"State path must start at 0, starts at {state.t0}")
        step = grid_steps(t, dt, what=f"time {t!r}")
        if state.n_nodes < step + 1:
            raise DomainMismatchError(f"State path ends at {state.end_time}, before t={t}")
        n_hist = max(0, int(np.ceil(-control.t0 / dt - GRID_TOLERANCE)))
        times = dt * np.arange(-n_hist, step)
        states = state.values[: step + 1].T[None, :, :]
        controls = values_at(control, times).T[None, :, :] if times.size else np.zeros((1, control.dim, 0))
        return cls(states, controls, step, dt, n_hist)
