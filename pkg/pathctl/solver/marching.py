"""
Backward marching of the coefficient system along characteristics.

With the delay step equal to the time step, the transport operators move values
exactly one cell per step: F1[n, j] comes from F1[n+1, j-1] and F2[n, i, j] from
F2[n+1, i-1, j-1]. Sources are evaluated on the known later level. The same routine
serves the single agent (coupling 1) and the symmetric game (coupling 1 - 1/N).
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from pathctl.helpers.errors import NumericalBlowUpError
from pathctl.helpers.logger import LOGGER
from pathctl.solver.models import LQParams, SolverGrid


@dataclass(frozen=True)
class CouplingCoefficients:
    """
    Scalars that distinguish the game system from the single-agent one.

    coupling is 1 - 1/N for a player of an N-player game and 1 for a single agent.
    The own gain multiplies the player's deviation in its feedback law, the full gain
    is the one the player is penalised with.
    """
    coupling: float
    cross_factor: float

    def gains(self, f0: float, f1_now: float, q: float) -> Tuple[float, float]:
        total = f0 + f1_now
        return q + self.coupling * total, q + total

    def riccati_rate(self, f0: float, f1_now: float, q: float, eps: float) -> float:
        own, full = self.gains(f0, f1_now, q)
        return 2.0 * own * full - own * own - eps

    def transport_rate(self, f0: float, f1_now: float, q: float) -> float:
        own, full = self.gains(f0, f1_now, q)
        return self.cross_factor * ((1.0 - self.coupling) * own + self.coupling * full)

    @property
    def kernel_rate(self) -> float:
        return self.coupling - 0.5 * self.coupling ** 2

    @property
    def diffusion_weight(self) -> float:
        return self.coupling


def march_backward(
    params: LQParams,
    grid: SolverGrid,
    coefficients: CouplingCoefficients,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    grid.check_against(params)
    n_t, n_theta, dt = grid.n_t, grid.n_theta, grid.dt
    m = n_theta - 1
    q, eps, c = params.q, params.eps, params.c
    half_var = 0.5 * params.sigma ** 2 * coefficients.diffusion_weight

    if c != 0:
        LOGGER.warning(
            f"Terminal weight c={c} makes the final and delay-boundary conditions disagree at t=T; "
            f"the final condition is kept at T and the boundary applies before it"
        )

    f0 = np.zeros(n_t)
    f1 = np.zeros((n_t, n_theta))
    f2 = np.zeros((n_t, n_theta, n_theta))
    f3 = np.zeros(n_t)
    f0[-1] = c

    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(n_t - 2, -1, -1):
            f1_next, f2_next = f1[n + 1], f2[n + 1]
            kernel_next = f1_next + 2.0 * f2_next[:, m]

            rate = coefficients.transport_rate(f0[n + 1], f1_next[m], q)
            f1[n, 1:] = f1_next[:-1] - dt * rate * kernel_next[:-1]

            # Explicit midpoint for the Riccati part
            slope = coefficients.riccati_rate(f0[n + 1], f1_next[m], q, eps)
            f0_mid = f0[n + 1] - 0.5 * dt * slope
            f1_mid = 0.5 * (f1_next[m] + f1[n, m])
            f0[n] = f0[n + 1] - dt * coefficients.riccati_rate(f0_mid, f1_mid, q, eps)
            f1[n, 0] = -f0[n]

            f2[n, 1:, 1:] = f2_next[:-1, :-1] - dt * coefficients.kernel_rate * np.outer(kernel_next[:-1], kernel_next[:-1])
            f2[n, 0, :] = -0.5 * f1[n]
            f2[n, :, 0] = -0.5 * f1[n]

            f3[n] = f3[n + 1] + dt * half_var * 0.5 * (f0[n] + f0[n + 1])

            if not (np.isfinite(f0[n]) and np.isfinite(f1[n]).all() and np.isfinite(f2[n]).all()):
                raise NumericalBlowUpError("Coefficient system blew up while marching backward", node=n * dt)

    return f0, f1, f2, f3
