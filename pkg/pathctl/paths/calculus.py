"""
Numerical functional derivatives on sampled paths.

The time derivative flat-extends the path, the space derivatives bump its last value.
Both are evaluated on grid prefixes by ito_residual to measure how far a functional
is from satisfying the discrete functional Itô formula.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, List, Optional, Sequence, Union

import numpy as np

from pathctl.helpers.constants import (
    PREDICATE_ATOL,
    PREDICATE_RTOL,
    ROUNDOFF_FLOOR,
    SPACE_STEP_SCALE,
)
from pathctl.helpers.errors import DomainMismatchError, GridAlignmentError
from pathctl.helpers.helpers import grid_steps, same_step
from pathctl.paths.core import PathPair, SampledPath, brownian_path, bump, flat_extend, subsample, sup_norm

Functional = Callable[[SampledPath], float]
PairFunctional = Callable[[PathPair], float]


class DerivativeMethod(str, Enum):
    FORWARD_TIME = "forward-time"
    CENTRAL_SPACE = "central-space"
    RICHARDSON_TIME = "richardson-time"


@dataclass(frozen=True)
class DerivativeEstimate:
    value: Union[float, np.ndarray]
    step: float
    method: DerivativeMethod

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"Derivative step must be positive, got {self.step!r}")


def delta_t(f: Functional, p: SampledPath, dt_step: Optional[float] = None) -> DerivativeEstimate:
    step = p.dt if dt_step is None else dt_step
    if not step > 0:
        raise GridAlignmentError(f"Time step must be positive, got {step!r}")
    value = (f(flat_extend(p, step)) - f(p)) / step
    return DerivativeEstimate(float(value), step, DerivativeMethod.FORWARD_TIME)


def delta_t_richardson(f: Functional, p: SampledPath, dt_step: Optional[float] = None) -> DerivativeEstimate:
    """One-sided time derivative with its first-order error removed from two step sizes."""
    step = p.dt if dt_step is None else dt_step
    coarse = delta_t(f, p, 2 * step).value
    fine = delta_t(f, p, step).value
    return DerivativeEstimate(2 * fine - coarse, step, DerivativeMethod.RICHARDSON_TIME)


def _space_step(p: SampledPath, h: Optional[float]) -> float:
    step = SPACE_STEP_SCALE * max(1.0, sup_norm(p)) if h is None else h
    if not step > 0:
        raise ValueError(f"Space step must be positive, got {step!r}")
    return step


def _squeeze(values: np.ndarray) -> Union[float, np.ndarray]:
    return float(values[0]) if values.shape[0] == 1 else values


def delta_x(f: Functional, p: SampledPath, h: Optional[float] = None) -> DerivativeEstimate:
    step = _space_step(p, h)
    gradient = np.empty(p.dim)
    for i, e in enumerate(np.eye(p.dim)):
        gradient[i] = (f(bump(p, step * e)) - f(bump(p, -step * e))) / (2 * step)
    return DerivativeEstimate(_squeeze(gradient), step, DerivativeMethod.CENTRAL_SPACE)


def delta_xx(f: Functional, p: SampledPath, h: Optional[float] = None) -> DerivativeEstimate:
    """Diagonal of the second space derivative by the three-point stencil."""
    step = _space_step(p, h)
    centre = f(p)
    curvature = np.empty(p.dim)
    for i, e in enumerate(np.eye(p.dim)):
        curvature[i] = (f(bump(p, step * e)) - 2 * centre + f(bump(p, -step * e))) / step ** 2
    return DerivativeEstimate(_squeeze(curvature), step, DerivativeMethod.CENTRAL_SPACE)


def ito_residual(f: Functional, x: SampledPath, qv: SampledPath) -> float:
    """f(X_T) - f(X_0) minus the time, first-order and second-order sums of the functional Itô formula."""
    if not same_step(x.dt, qv.dt) or x.t0 != qv.t0 or x.n_nodes != qv.n_nodes:
        raise DomainMismatchError(
            f"Path and quadratic variation grids differ: "
            f"({x.t0!r}, {x.dt!r}, {x.n_nodes}) vs ({qv.t0!r}, {qv.dt!r}, {qv.n_nodes})"
        )
    if qv.dim not in (1, x.dim):
        raise DomainMismatchError(f"Quadratic variation of dimension {qv.dim} does not fit a {x.dim}-dim path")

    total = 0.0
    for k in range(x.n_nodes - 1):
        prefix = SampledPath(x.t0, x.dt, x.values[: k + 1])
        dx = x.values[k + 1] - x.values[k]
        dq = qv.values[k + 1] - qv.values[k]
        total += delta_t(f, prefix).value * x.dt
        total += float(np.dot(np.atleast_1d(delta_x(f, prefix).value), dx))
        total += 0.5 * float(np.dot(np.atleast_1d(delta_xx(f, prefix).value), np.broadcast_to(dq, dx.shape)))
    start = SampledPath(x.t0, x.dt, x.values[:1])
    return float(f(x) - f(start) - total)


def close_enough(a: float, b: float, rtol: float = PREDICATE_RTOL, atol: float = PREDICATE_ATOL) -> bool:
    return abs(a - b) <= max(rtol * max(abs(a), abs(b)), atol)


def predictability_check(f: PairFunctional, pair: PathPair, h_set: Sequence[float]) -> bool:
    """True when no bump of the control's current value moves f."""
    if len(h_set) == 0:
        raise ValueError("predictability_check needs at least one bump size")
    base = f(pair)
    for h in h_set:
        if h == 0:
            raise ValueError("Bump sizes must be nonzero")
        for e in np.eye(pair.control.dim):
            bumped = PathPair(pair.state, bump(pair.control, h * e))
            if not close_enough(base, f(bumped)):
                return False
    return True


# Built-in functionals of scalar paths

def last_value(p: SampledPath) -> float:
    return float(p.values[-1, 0])


def running_integral(p: SampledPath) -> float:
    # The final node is excluded, so bumping the current value leaves the integral untouched
    return float(p.dt * np.sum(p.values[:-1, 0]))


def elapsed_time(p: SampledPath) -> float:
    return p.end_time


def cylindrical(phi: Callable[[float, float], float]) -> Functional:
    def functional(p: SampledPath) -> float:
        return float(phi(p.end_time, p.values[-1, 0]))
    return functional


def product(f: Functional, g: Functional) -> Functional:
    def functional(p: SampledPath) -> float:
        return f(p) * g(p)
    return functional


def control_last_value(pair: PathPair) -> float:
    return float(pair.control.values[-1, 0])


def ito_refinement_study(
    f: Functional,
    levels: Iterable[float],
    n_paths: int = 100,
    seed: int = 0,
    sigma: float = 1.0,
    horizon: float = 1.0,
) -> List[float]:
    """
    Median |ito_residual| over n_paths Brownian paths, one entry per step in levels.

    Every level sees the same Brownian paths: they are drawn on the finest grid and
    subsampled, so the medians isolate the effect of the step.
    """
    levels = list(levels)
    finest = min(levels)
    factors = [grid_steps(level, finest, what=f"level {level!r}") for level in levels]
    residuals = np.empty((len(levels), n_paths))
    for path_id in range(n_paths):
        x, qv = brownian_path(sigma, horizon, finest, seed=[seed, path_id])
        for row, factor in enumerate(factors):
            residuals[row, path_id] = abs(ito_residual(f, subsample(x, factor), subsample(qv, factor)))
    return [float(m) for m in np.median(residuals, axis=1)]


def is_shrinking(medians: Sequence[float], floor: float = ROUNDOFF_FLOOR) -> bool:
    """Medians ordered coarse to fine decrease, values under floor counting as converged."""
    for coarse, fine in zip(medians, medians[1:]):
        if fine <= floor:
            continue
        if not fine < coarse:
            return False
    return True
