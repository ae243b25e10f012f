"""
Delayed linear-quadratic control problem.

The value functional is quadratic in the state and in the control history over the
delay window,

    V(t, y, z) = f0(t) y^2/2 + y * int f1(t, theta) z(t+theta) + iint f2 z z + f3(t),

and the coefficients solve a backward system of one Riccati equation coupled with two
transport equations. Window integrals are left Riemann sums over theta_0 .. theta_{M-1};
the theta = 0 node only enters through boundary values.
"""
from typing import Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from pathctl.helpers.constants import GRID_TOLERANCE, RESIDUAL_LADDER
from pathctl.helpers.errors import DomainMismatchError, NumericalBlowUpError
from pathctl.helpers.logger import LOGGER
from pathctl.paths.core import SampledPath, values_at
from pathctl.solver.convergence import CrossFactorSelection, Probe, select_by_residual
from pathctl.solver.marching import CouplingCoefficients, march_backward
from pathctl.solver.models import HamiltonianInputs, LQParams, SolverGrid
from pathctl.solver.surfaces import Surfaces


def solve_f_system(params: LQParams, grid: SolverGrid, cross_factor: float = 1.0) -> Surfaces:
    LOGGER.info(f"Solving the delayed LQ system on dt={grid.dt}, n_t={grid.n_t}, n_theta={grid.n_theta}, kappa={cross_factor}")
    f0, f1, f2, f3 = march_backward(params, grid, CouplingCoefficients(coupling=1.0, cross_factor=cross_factor))
    return Surfaces(f0, f1, f2, f3, grid=grid, params=params, cross_factor=cross_factor)


# ---------------------------------------------------------------------------
# Window sampling and numerical time derivatives of the stored surfaces

def window_times(s: Surfaces, t: float) -> np.ndarray:
    return t - s.params.tau + s.dt * np.arange(s.delay_steps)


def control_window(s: Surfaces, t: float, z: SampledPath) -> np.ndarray:
    """Control values at the window nodes t - tau + j*dt, j < M; shape (M,) or (M, dim)."""
    tol = GRID_TOLERANCE * s.dt
    start = t - s.params.tau
    if z.end_time < t - s.dt - tol:
        raise DomainMismatchError(f"Control history ends at {z.end_time!r}, needs to reach {t - s.dt!r}")
    if z.t0 > max(start, 0.0) + tol:
        raise DomainMismatchError(f"Control history starts at {z.t0!r}, needs to cover {start!r}")
    window = values_at(z, window_times(s, t))
    return window[:, 0] if window.shape[1] == 1 else window


def _forward_theta(a: np.ndarray, axis: int) -> np.ndarray:
    """Forward differences along axis, backward at the last node."""
    diff = np.diff(a, axis=axis)
    last = np.take(diff, [-1], axis=axis)
    return np.concatenate([diff, last], axis=axis)


def f0_rate(s: Surfaces, n: int) -> float:
    if n < s.grid.n_t - 1:
        return (s.f0[n + 1] - s.f0[n]) / s.dt
    return (s.f0[n] - s.f0[n - 1]) / s.dt


def f3_rate(s: Surfaces, n: int) -> float:
    if n < s.grid.n_t - 1:
        return (s.f3[n + 1] - s.f3[n]) / s.dt
    return (s.f3[n] - s.f3[n - 1]) / s.dt


def transport_derivative(s: Surfaces, n: int) -> np.ndarray:
    """(d/dt - d/dtheta) f1 at time node n, differenced along characteristics where possible."""
    f1, dt = s.f1, s.dt
    if n < s.grid.n_t - 1:
        out = (f1[n + 1] - f1[n] - _forward_theta(f1[n], 0)) / dt
        out[1:] = (f1[n + 1, :-1] - f1[n, 1:]) / dt
    else:
        out = (f1[n] - f1[n - 1] - _forward_theta(f1[n], 0)) / dt
        out[:-1] = (f1[n, :-1] - f1[n - 1, 1:]) / dt
    return out


def kernel_transport_derivative(s: Surfaces, n: int) -> np.ndarray:
    """(d/dt - d/dtheta1 - d/dtheta2) f2 at time node n."""
    f2, dt = s.f2, s.dt
    if n < s.grid.n_t - 1:
        out = (f2[n + 1] - f2[n] - _forward_theta(f2[n], 0) - _forward_theta(f2[n], 1)) / dt
        out[1:, 1:] = (f2[n + 1, :-1, :-1] - f2[n, 1:, 1:]) / dt
    else:
        out = (f2[n] - f2[n - 1] - _forward_theta(f2[n], 0) - _forward_theta(f2[n], 1)) / dt
        out[:-1, :-1] = (f2[n, :-1, :-1] - f2[n - 1, 1:, 1:]) / dt
    return out


# ---------------------------------------------------------------------------
# Pieces of the ansatz shared with the game

def quadratic_form(s: Surfaces, n: int, x: float, window: np.ndarray) -> float:
    m, dt = s.delay_steps, s.dt
    linear = dt * np.dot(s.f1[n, :m], window)
    kernel = dt * dt * window @ s.f2[n, :m, :m] @ window
    return float(0.5 * s.f0[n] * x * x + x * linear + kernel + s.f3[n])


def space_derivative(s: Surfaces, n: int, x: float, window: np.ndarray) -> float:
    return float(s.f0[n] * x + s.dt * np.dot(s.f1[n, :s.delay_steps], window))


def time_derivative(s: Surfaces, n: int, x: float, window: np.ndarray, current: float = 0.0) -> float:
    """Time derivative of the ansatz when the control's current value is `current`."""
    m, dt = s.delay_steps, s.dt
    delayed = window[0]
    d1 = transport_derivative(s, n)[:m]
    d2 = kernel_transport_derivative(s, n)[:m, :m]
    value = 0.5 * f0_rate(s, n) * x * x
    value += x * (s.f1[n, m] * current - s.f1[n, 0] * delayed + dt * np.dot(d1, window))
    value += 2.0 * current * dt * np.dot(s.f2[n, :m, m], window)
    value -= 2.0 * delayed * dt * np.dot(s.f2[n, :m, 0], window)
    value += dt * dt * window @ d2 @ window
    value += f3_rate(s, n)
    return float(value)


def batch_value(s: Surfaces, n: int, x: np.ndarray, windows: np.ndarray) -> np.ndarray:
    """quadratic_form for a batch: x of shape (k,), windows of shape (k, M)."""
    m, dt = s.delay_steps, s.dt
    linear = dt * windows @ s.f1[n, :m]
    kernel = dt * dt * np.einsum("pi,ij,pj->p", windows, s.f2[n, :m, :m], windows)
    return 0.5 * s.f0[n] * x * x + x * linear + kernel + s.f3[n]


# ---------------------------------------------------------------------------
# Single-agent operations

def eval_value(s: Surfaces, t: float, y: float, z: SampledPath) -> float:
    return quadratic_form(s, s.time_index(t), y, control_window(s, t, z))


def eval_derivatives(s: Surfaces, t: float, y: float, z: SampledPath) -> Tuple[float, float, float]:
    """(dV/dy, d2V/dy2, time derivative with the current control removed)."""
    n = s.time_index(t)
    window = control_window(s, t, z)
    return (
        space_derivative(s, n, y, window),
        float(s.f0[n]),
        time_derivative(s, n, y, window),
    )


def feedback_coefficients(s: Surfaces, n: int) -> Tuple[float, np.ndarray]:
    """State gain K_n and window kernel G_n with optimal control -(K_n y + dt * sum G_n z)."""
    m = s.delay_steps
    gain = s.params.q + s.f0[n] + s.f1[n, m]
    kernel = s.f1[n, :m] + 2.0 * s.f2[n, :m, m]
    return float(gain), kernel


def optimal_control(s: Surfaces, t: float, y: float, z: SampledPath) -> float:
    n = s.time_index(t)
    gain, kernel = feedback_coefficients(s, n)
    return float(-gain * y - s.dt * np.dot(kernel, control_window(s, t, z)))


def hamiltonian(params: LQParams, t: float, y: float, z: SampledPath, inputs: HamiltonianInputs) -> float:
    delayed = float(values_at(z, [t - params.tau])[0, 0])
    alpha = inputs.alpha
    return (
        0.5 * params.sigma ** 2 * inputs.gamma
        + (alpha - delayed) * inputs.p
        + 0.5 * alpha * alpha
        + params.q * alpha * y
        + 0.5 * params.eps * y * y
    )


def hjb_residual(s: Surfaces, t: float, y: float, z: SampledPath) -> float:
    n = s.time_index(t)
    window = control_window(s, t, z)
    dx, dxx, dt_removed = space_derivative(s, n, y, window), float(s.f0[n]), time_derivative(s, n, y, window)
    alpha = optimal_control(s, t, y, z)
    params = s.params
    return float(
        dt_removed
        + 0.5 * params.sigma ** 2 * dxx
        - window[0] * dx
        - 0.5 * alpha * alpha
        + 0.5 * params.eps * y * y
    )


def probe_residual(s: Surfaces, probe: Probe) -> float:
    return hjb_residual(s, probe.t, float(probe.y[0]), probe.z)


def modified_hamiltonian(
    s: Surfaces,
    t: float,
    y: float,
    z: SampledPath,
    alpha_grid: Sequence[float],
) -> Tuple[float, float]:
    """Minimum over alpha_grid of the time derivative with the current control set to alpha plus H."""
    alphas = np.asarray(alpha_grid, dtype=float)
    if alphas.size == 0:
        raise ValueError("alpha_grid must not be empty")
    n = s.time_index(t)
    window = control_window(s, t, z)
    base = time_derivative(s, n, y, window, current=0.0)
    slope = time_derivative(s, n, y, window, current=1.0) - base
    p = space_derivative(s, n, y, window)
    params = s.params
    values = (
        base + slope * alphas
        + 0.5 * params.sigma ** 2 * s.f0[n]
        + (alphas - window[0]) * p
        + 0.5 * alphas ** 2
        + params.q * alphas * y
        + 0.5 * params.eps * y * y
    )
    best = int(np.argmin(values))
    return float(values[best]), float(alphas[best])


# ---------------------------------------------------------------------------
# References and selection

def classical_riccati(params: LQParams, grid: SolverGrid) -> np.ndarray:
    """P' = (P + q)^2 - eps, P(T) = c on the grid times; the delay-free limit of f0."""
    grid.check_against(params)
    times = grid.dt * np.arange(grid.n_t)
    solution = solve_ivp(
        lambda t, p: (p + params.q) ** 2 - params.eps,
        (params.horizon, 0.0),
        [params.c],
        t_eval=times[::-1],
        rtol=1e-10,
        atol=1e-12,
    )
    if not solution.success:
        raise NumericalBlowUpError(f"Riccati reference failed: {solution.message}", node=float(solution.t[-1]))
    return solution.y[0][::-1]


def select_cross_factor(
    params: LQParams,
    ladder: Sequence[int] = RESIDUAL_LADDER,
    n_probes: int = 20,
    seed: int = 0,
) -> CrossFactorSelection:
    return select_by_residual(
        lambda grid, kappa: solve_f_system(params, grid, kappa),
        probe_residual,
        params,
        ladder,
        n_probes,
        seed,
    )
