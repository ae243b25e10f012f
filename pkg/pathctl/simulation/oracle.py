"""
Deterministic (sigma = 0) reference solutions.

With a control that is constant on each simulation step the drift a_k - a_{k-M} is
constant on [t_k, t_{k+1}), so the state is exactly piecewise linear and affine in the
control vector. The running cost is integrated exactly on every step, which makes the
total cost an explicit convex quadratic in the controls.
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from pathctl.helpers.constants import ORACLE_MAX_UNKNOWNS
from pathctl.helpers.errors import SingularSystemError
from pathctl.helpers.helpers import grid_steps
from pathctl.helpers.logger import LOGGER
from pathctl.paths.core import SampledPath
from pathctl.simulation.models import SimConfig
from pathctl.solver.models import LQParams


@dataclass(frozen=True, eq=False)
class OracleResult:
    optimum: float
    control: SampledPath
    state: SampledPath


def _require_deterministic(params: LQParams) -> None:
    if params.sigma != 0:
        raise ValueError(f"The deterministic oracle needs sigma=0, got sigma={params.sigma}")


def _affine_state_map(params: LQParams, cfg: SimConfig) -> Tuple[np.ndarray, np.ndarray, int, int]:
    """x = offset + B a over the nodes 0..N for controls a_0..a_{N-1}."""
    dt = cfg.dt_sim
    n = grid_steps(params.horizon, dt, what="horizon")
    m = grid_steps(params.tau, dt, what="tau")
    if n > ORACLE_MAX_UNKNOWNS:
        raise ValueError(f"The oracle handles at most {ORACLE_MAX_UNKNOWNS} controls, got {n}")

    k = np.arange(n + 1)[:, None]
    l = np.arange(n)[None, :]
    B = dt * ((l < k).astype(float) - (l + m < k).astype(float))

    history = cfg.history_matrix(1, m)[0]
    pushed = np.concatenate([[0.0], np.cumsum(history)])
    offset = float(cfg.initial_states(1)[0]) - dt * pushed[np.minimum(np.arange(n + 1), m)]
    return offset, B, n, m


def trajectory_cost(params: LQParams, cfg: SimConfig, controls: np.ndarray) -> float:
    """Exact cost of a step control, by direct recursion over the steps."""
    _require_deterministic(params)
    dt = cfg.dt_sim
    n = grid_steps(params.horizon, dt, what="horizon")
    m = grid_steps(params.tau, dt, what="tau")
    controls = np.asarray(controls, dtype=float)
    past = np.concatenate([cfg.history_matrix(1, m)[0], controls])
    x = float(cfg.initial_states(1)[0])
    total = 0.0
    for k in range(n):
        a = controls[k]
        x_next = x + (a - past[k]) * dt
        total += dt * (
            0.5 * a * a
            + params.q * a * 0.5 * (x + x_next)
            + params.eps / 6.0 * (x * x + x * x_next + x_next * x_next)
        )
        x = x_next
    return total + 0.5 * params.c * x * x


def quadratic_program(params: LQParams, cfg: SimConfig) -> Tuple[np.ndarray, np.ndarray, float]:
    """(H, g, const) with cost(a) = const + g.a + a.H.a / 2."""
    _require_deterministic(params)
    dt = cfg.dt_sim
    offset, B, n, _ = _affine_state_map(params, cfg)
    left, right = B[:-1], B[1:]
    x_left, x_right = offset[:-1], offset[1:]
    last, x_last = B[-1], offset[-1]

    mixed = left.T @ right
    H = dt * np.eye(n)
    H += 0.5 * dt * params.q * ((left + right) + (left + right).T)
    H += params.eps * dt / 3.0 * (left.T @ left + right.T @ right + 0.5 * (mixed + mixed.T))
    H += params.c * np.outer(last, last)

    g = 0.5 * dt * params.q * (x_left + x_right)
    g += params.eps * dt / 6.0 * (
        2.0 * left.T @ x_left + left.T @ x_right + right.T @ x_left + 2.0 * right.T @ x_right
    )
    g += params.c * x_last * last

    const = params.eps * dt / 6.0 * (x_left @ x_left + x_left @ x_right + x_right @ x_right)
    const += 0.5 * params.c * x_last * x_last
    return H, g, float(const)


def deterministic_oracle(params: LQParams, cfg: SimConfig) -> OracleResult:
    H, g, const = quadratic_program(params, cfg)
    try:
        factor = cho_factor(H)
    except LinAlgError as e:
        raise SingularSystemError(f"Normal matrix of the oracle is not positive definite: {e}") from e
    controls = -cho_solve(factor, g)
    optimum = const + 0.5 * g @ controls

    offset, B, _, _ = _affine_state_map(params, cfg)
    states = offset + B @ controls
    LOGGER.info(f"Deterministic oracle over {controls.size} controls: optimum {optimum:.8f}")
    return OracleResult(
        optimum=float(optimum),
        control=SampledPath(t0=0.0, dt=cfg.dt_sim, values=controls),
        state=SampledPath(t0=0.0, dt=cfg.dt_sim, values=states),
    )


def backward_induction_reference(params: LQParams, cfg: SimConfig) -> float:
    """
    Discrete Riccati recursion for the same step controls and exact step costs.
    Valid when tau >= T and the history is zero, so the delayed term never acts.
    """
    _require_deterministic(params)
    if params.tau < params.horizon:
        raise ValueError(f"Backward induction needs tau >= horizon, got tau={params.tau}")
    if cfg.z_hist is not None and np.any(cfg.z_hist.values != 0):
        raise ValueError("Backward induction needs a zero control history")
    dt = cfg.dt_sim
    n = grid_steps(params.horizon, dt, what="horizon")
    q, eps = params.q, params.eps

    # Step cost r_aa a^2 / 2 + r_ax a x + r_xx x^2 / 2 with x_next = x + a dt
    r_aa = dt * (1.0 + q * dt + eps * dt * dt / 3.0)
    r_ax = dt * (q + 0.5 * eps * dt)
    r_xx = dt * eps

    p = params.c
    for _ in range(n):
        curvature = r_aa + p * dt * dt
        if not curvature > 0:
            raise SingularSystemError(f"Step problem is not convex (curvature {curvature})")
        gain = -(r_ax + p * dt) / curvature
        p = r_aa * gain * gain + 2.0 * r_ax * gain + r_xx + p * (1.0 + gain * dt) ** 2
    y0 = float(cfg.initial_states(1)[0])
    return 0.5 * p * y0 * y0
