from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Union

import numpy as np
import pandas as pd

from pathctl.helpers.classes import dict_to_basemodel
from pathctl.helpers.constants import SYMMETRY_TOLERANCE
from pathctl.helpers.errors import DomainMismatchError
from pathctl.helpers.helpers import grid_steps, read_json, write_json
from pathctl.helpers.logger import LOGGER
from pathctl.solver.models import GameParams, LQParams, SolverGrid


@dataclass(frozen=True, eq=False)
class Surfaces:
    """
    Coefficients of the quadratic value functional on the solver grid.

    f0[n], f3[n] live on t_n = n*dt; f1[n, j] on (t_n, theta_j) with theta_j = -tau + j*dt,
    so j = 0 is the delay end -tau and j = n_theta - 1 is theta = 0; f2[n, i, j] likewise.
    """
    f0: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    f3: np.ndarray
    grid: SolverGrid
    params: LQParams
    cross_factor: float

    prefix = "f"
    kind = "single"

    def __post_init__(self):
        n_t, n_theta = self.grid.n_t, self.grid.n_theta
        expected = {
            "f0": (n_t,),
            "f1": (n_t, n_theta),
            "f2": (n_t, n_theta, n_theta),
            "f3": (n_t,),
        }
        for name, shape in expected.items():
            array = np.array(getattr(self, name), dtype=float)
            if array.shape != shape:
                raise DomainMismatchError(f"{name} has shape {array.shape}, expected {shape}")
            array.setflags(write=False)
            object.__setattr__(self, name, array)

    @property
    def coupling(self) -> float:
        """Weight of a player's own influence on the quantity it is penalised on; 1 for a single agent."""
        return 1.0

    @property
    def dt(self) -> float:
        return self.grid.dt

    @property
    def delay_steps(self) -> int:
        return self.grid.n_theta - 1

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.grid.n_t)

    @property
    def thetas(self) -> np.ndarray:
        return -self.params.tau + self.dt * np.arange(self.grid.n_theta)

    def time_index(self, t: float) -> int:
        n = grid_steps(t, self.dt, what=f"time {t!r}")
        if not 0 <= n < self.grid.n_t:
            raise DomainMismatchError(f"Time {t!r} is outside [0, {self.params.horizon!r}]")
        return n

    def arrays(self) -> Dict[str, np.ndarray]:
        return {f"{self.prefix}{k}": getattr(self, f"f{k}") for k in range(4)}

    def max_abs(self) -> float:
        return float(max(np.max(np.abs(a)) for a in self.arrays().values()))

    def invariant_flags(self) -> Dict[str, bool]:
        interior = slice(0, self.grid.n_t - 1)
        return {
            "kernel_symmetric": bool(
                np.max(np.abs(self.f2 - np.swapaxes(self.f2, 1, 2))) <= SYMMETRY_TOLERANCE
            ),
            "final_conditions": bool(
                self.f0[-1] == self.params.c
                and not self.f1[-1].any()
                and not self.f2[-1].any()
                and self.f3[-1] == 0.0
            ),
            "delay_boundary_linear": bool(np.all(self.f1[interior, 0] + self.f0[interior] == 0.0)),
            "delay_boundary_kernel": bool(
                np.all(self.f2[interior, :, 0] + 0.5 * self.f1[interior] == 0.0)
                and np.all(self.f2[interior, 0, :] + 0.5 * self.f1[interior] == 0.0)
            ),
        }

    def meta(self) -> dict:
        from pathctl import __version__

        return {
            "kind": self.kind,
            "params": self.params,
            "grid": self.grid,
            "cross_factor": self.cross_factor,
            "solver_version": __version__,
        }


@dataclass(frozen=True, eq=False)
class GameSurfaces(Surfaces):
    """Coefficients of every player's value functional in the symmetric game; same layout as Surfaces."""
    n_players: int

    prefix = "e"
    kind = "game"

    @property
    def coupling(self) -> float:
        return 1.0 - 1.0 / self.n_players

    @property
    def e0(self) -> np.ndarray:
        return self.f0

    @property
    def e1(self) -> np.ndarray:
        return self.f1

    @property
    def e2(self) -> np.ndarray:
        return self.f2

    @property
    def e3(self) -> np.ndarray:
        return self.f3

    def meta(self) -> dict:
        return {**super().meta(), "n_players": self.n_players}


def _time_frame(s: Surfaces, values: np.ndarray) -> pd.DataFrame:
    return pd.DataFrame({"t": s.times, "value": values})


def _theta_frame(s: Surfaces, values: np.ndarray) -> pd.DataFrame:
    t, theta = np.meshgrid(s.times, s.thetas, indexing="ij")
    return pd.DataFrame({"t": t.ravel(), "theta": theta.ravel(), "value": values.ravel()})


def _kernel_frame(s: Surfaces, values: np.ndarray) -> pd.DataFrame:
    t, theta1, theta2 = np.meshgrid(s.times, s.thetas, s.thetas, indexing="ij")
    return pd.DataFrame({
        "t": t.ravel(),
        "theta1": theta1.ravel(),
        "theta2": theta2.ravel(),
        "value": values.ravel(),
    })


def surface_frames(s: Surfaces) -> Dict[str, pd.DataFrame]:
    p = s.prefix
    return {
        f"{p}0": _time_frame(s, s.f0),
        f"{p}1": _theta_frame(s, s.f1),
        f"{p}2": _kernel_frame(s, s.f2),
        f"{p}3": _time_frame(s, s.f3),
    }


def save_surfaces(s: Surfaces, directory: Union[str, Path]) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, frame in surface_frames(s).items():
        frame.to_csv(directory / f"{name}.csv", index=False)
    write_json(directory / "meta.json", s.meta())
    LOGGER.info(f"Saved {s.kind} surfaces to {directory}")
    return directory


def load_surfaces(directory: Union[str, Path]) -> Surfaces:
    directory = Path(directory)
    meta_file = directory / "meta.json"
    if not meta_file.exists():
        raise FileNotFoundError(f"No meta.json in {directory}")
    meta = read_json(meta_file)
    grid = dict_to_basemodel(SolverGrid, meta["grid"])
    game = meta.get("kind") == "game"
    prefix = GameSurfaces.prefix if game else Surfaces.prefix
    shapes = [(grid.n_t,), (grid.n_t, grid.n_theta), (grid.n_t, grid.n_theta, grid.n_theta), (grid.n_t,)]

    arrays = []
    for k, shape in enumerate(shapes):
        file = directory / f"{prefix}{k}.csv"
        if not file.exists():
            raise FileNotFoundError(f"Missing surface file {file}")
        frame = pd.read_csv(file, float_precision="round_trip")
        arrays.append(frame["value"].to_numpy(dtype=float).reshape(shape))

    if game:
        return GameSurfaces(
            *arrays,
            grid=grid,
            params=dict_to_basemodel(GameParams, meta["params"]),
            cross_factor=float(meta["cross_factor"]),
            n_players=int(meta["n_players"]),
        )
    return Surfaces(
        *arrays,
        grid=grid,
        params=dict_to_basemodel(LQParams, meta["params"]),
        cross_factor=float(meta["cross_factor"]),
    )
