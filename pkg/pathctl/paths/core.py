"""Uniform-grid paths and the deformations functional derivatives are built on."""
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from pathctl.helpers.constants import GRID_TOLERANCE
from pathctl.helpers.errors import DimensionMismatchError, DomainMismatchError, GridAlignmentError
from pathctl.helpers.helpers import grid_steps, same_step

ArrayLike = Union[float, Sequence[float], np.ndarray]


@dataclass(frozen=True, eq=False)
class SampledPath:
    """
    A càdlàg path sampled on the nodes t0 + k*dt.

    values has shape (n_nodes, dim); the value on [t_k, t_{k+1}) is values[k] and
    the current value of the path is its last row. Before t0 the path is zero.
    """
    t0: float
    dt: float
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise DimensionMismatchError(
                f"Path values must be a non-empty (n_nodes, dim) array, got shape {values.shape}"
            )
        if not float(self.dt) > 0:
            raise GridAlignmentError(f"Grid step must be positive, got dt={self.dt!r}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "dt", float(self.dt))

    @classmethod
    def constant(cls, value: ArrayLike, t0: float, dt: float, n_nodes: int) -> "SampledPath":
        row = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(t0=t0, dt=dt, values=np.tile(row, (n_nodes, 1)))

    @property
    def n_nodes(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def end_time(self) -> float:
        return self.t0 + (self.n_nodes - 1) * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_nodes)

    @property
    def last(self) -> np.ndarray:
        return self.values[-1]

    @property
    def scalar(self) -> np.ndarray:
        """Values of a one-dimensional path as a flat array."""
        if self.dim != 1:
            raise DimensionMismatchError(f"Expected a scalar path, got dimension {self.dim}")
        return self.values[:, 0]

    def node_index(self, s: float) -> int:
        """Index of the grid node at time s."""
        k = grid_steps(s - self.t0, self.dt, what=f"time {s!r}")
        if k < 0 or k >= self.n_nodes:
            raise DomainMismatchError(f"Time {s!r} is outside [{self.t0!r}, {self.end_time!r}]")
        return k

    def __eq__(self, other) -> bool:
        if not isinstance(other, SampledPath):
            return NotImplemented
        return (
            self.t0 == other.t0
            and self.dt == other.dt
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class PathPair:
    """A state path and a control path over the same grid."""
    state: SampledPath
    control: SampledPath

    def __post_init__(self):
        if not same_step(self.state.dt, self.control.dt):
            raise GridAlignmentError(
                f"State and control steps differ: {self.state.dt!r} != {self.control.dt!r}"
            )
        if self.state.t0 != self.control.t0 or self.state.n_nodes != self.control.n_nodes:
            raise DomainMismatchError(
                f"State covers [{self.state.t0!r}, {self.state.end_time!r}] but control covers "
                f"[{self.control.t0!r}, {self.control.end_time!r}]"
            )

    @property
    def end_time(self) -> float:
        return self.state.end_time


def _as_vector(h: ArrayLike, dim: int) -> np.ndarray:
    vector = np.atleast_1d(np.asarray(h, dtype=float))
    if vector.ndim != 1 or vector.shape[0] != dim:
        raise DimensionMismatchError(f"Expected a vector of dimension {dim}, got shape {vector.shape}")
    return vector


def flat_extend(p: SampledPath, delta: float) -> SampledPath:
    if delta < 0:
        raise GridAlignmentError(f"Flat extension needs delta >= 0, got {delta!r}")
    steps = grid_steps(delta, p.dt, what="extension")
    if steps == 0:
        return p
    tail = np.repeat(p.values[-1:], steps, axis=0)
    return SampledPath(t0=p.t0, dt=p.dt, values=np.vstack([p.values, tail]))


def bump(p: SampledPath, h: ArrayLike) -> SampledPath:
    vector = _as_vector(h, p.dim)
    values = p.values.copy()
    values[-1] = values[-1] + vector
    return SampledPath(t0=p.t0, dt=p.dt, values=values)


def substitute_last(z: SampledPath, alpha: ArrayLike) -> SampledPath:
    vector = _as_vector(alpha, z.dim)
    values = z.values.copy()
    values[-1] = vector
    return SampledPath(t0=z.t0, dt=z.dt, values=values)


def sup_norm(p: SampledPath) -> float:
    return float(np.max(np.linalg.norm(p.values, axis=1)))


def lambda_metric(p: SampledPath, q: SampledPath) -> float:
    """Sup distance after flat-extending the shorter path, plus the gap between end times."""
    if not same_step(p.dt, q.dt):
        raise GridAlignmentError(f"Paths have incompatible steps {p.dt!r} and {q.dt!r}")
    if p.t0 != q.t0:
        raise DomainMismatchError(f"Paths start at different times {p.t0!r} and {q.t0!r}")
    if p.dim != q.dim:
        raise DimensionMismatchError(f"Paths have dimensions {p.dim} and {q.dim}")
    short, long = (p, q) if p.n_nodes <= q.n_nodes else (q, p)
    gap = long.n_nodes - short.n_nodes
    extended = flat_extend(short, gap * short.dt)
    distance = np.max(np.linalg.norm(extended.values - long.values, axis=1))
    return float(distance + gap * p.dt)


def concat_control(z: SampledPath, a: SampledPath, t: float) -> SampledPath:
    """The control equal to z strictly before t and to a from t on."""
    if not same_step(z.dt, a.dt):
        raise GridAlignmentError(f"Controls have incompatible steps {z.dt!r} and {a.dt!r}")
    if z.dim != a.dim:
        raise DimensionMismatchError(f"Controls have dimensions {z.dim} and {a.dim}")
    k = grid_steps(t - z.t0, z.dt, what=f"splice time {t!r}")
    if k < 0:
        raise DomainMismatchError(f"Splice time {t!r} is before the history start {z.t0!r}")
    if abs(a.t0 - t) > GRID_TOLERANCE * z.dt:
        raise DomainMismatchError(f"Continuation starts at {a.t0!r}, expected the splice time {t!r}")
    if z.n_nodes < k:
        raise DomainMismatchError(f"History ends at {z.end_time!r}, leaving a gap before {t!r}")
    if z.n_nodes > k + 1:
        raise DomainMismatchError(f"History runs to {z.end_time!r}, past the splice time {t!r}")
    return SampledPath(t0=z.t0, dt=z.dt, values=np.vstack([z.values[:k], a.values]))


def values_at(p: SampledPath, times: ArrayLike) -> np.ndarray:
    """Càdlàg lookup, shape (len(times), dim): zero before t0, last value after the end."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    index = np.floor((times - p.t0) / p.dt + GRID_TOLERANCE).astype(int)
    out = p.values[np.clip(index, 0, p.n_nodes - 1)].copy()
    out[index < 0] = 0.0
    return out


def value_at(p: SampledPath, s: float) -> np.ndarray:
    return values_at(p, [s])[0]


def restrict(p: SampledPath, start: float, stop: float) -> SampledPath:
    """Sub-path on the nodes in [start, stop)."""
    times = p.times
    tol = GRID_TOLERANCE * p.dt
    mask = (times >= start - tol) & (times < stop - tol)
    if not mask.any():
        raise DomainMismatchError(f"No nodes of the path fall in [{start!r}, {stop!r})")
    first = int(np.argmax(mask))
    return SampledPath(t0=times[first], dt=p.dt, values=p.values[mask])


def subsample(p: SampledPath, factor: int) -> SampledPath:
    """Every factor-th node, on the coarser grid factor*dt."""
    if factor < 1:
        raise GridAlignmentError(f"Subsampling factor must be >= 1, got {factor}")
    return SampledPath(t0=p.t0, dt=p.dt * factor, values=p.values[::factor])


def write_path_csv(p: SampledPath, file: Union[str, Path]) -> Path:
    file = Path(file)
    file.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(p.values, columns=[f"v{i + 1}" for i in range(p.dim)])
    frame.insert(0, "time", p.times)
    frame.to_csv(file, index=False)
    return file


def read_path_csv(file: Union[str, Path], dt: Optional[float] = None) -> SampledPath:
    frame = pd.read_csv(file, float_precision="round_trip")
    if "time" not in frame.columns:
        raise DomainMismatchError(f"{file} has no 'time' column")
    times = frame["time"].to_numpy(dtype=float)
    values = frame.drop(columns=["time"]).to_numpy(dtype=float)
    if len(times) > 1:
        steps = np.diff(times)
        dt_read = float(steps.mean())
        if np.max(np.abs(steps - dt_read)) > 1e-6 * dt_read:
            raise GridAlignmentError(f"{file} is not sampled on a uniform grid")
        if dt is not None and not abs(dt - dt_read) <= 1e-6 * dt:
            raise GridAlignmentError(f"{file} has step {dt_read!r}, expected {dt!r}")
        dt = dt if dt is not None else dt_read
    elif dt is None:
        raise GridAlignmentError(f"{file} holds a single node; pass dt explicitly")
    return SampledPath(t0=times[0], dt=dt, values=values)


def brownian_path(
    sigma: float,
    horizon: float,
    dt: float,
    seed: Union[int, Sequence[int]],
    y0: float = 0.0,
) -> Tuple[SampledPath, SampledPath]:
    """A sampled path of y0 + sigma*W on [0, horizon] and its quadratic variation sigma^2 t."""
    steps = grid_steps(horizon, dt, what="horizon")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    increments = sigma * np.sqrt(dt) * rng.standard_normal(steps)
    x = y0 + np.concatenate([[0.0], np.cumsum(increments)])
    qv = sigma ** 2 * dt * np.arange(steps + 1)
    return SampledPath(0.0, dt, x), SampledPath(0.0, dt, qv)
