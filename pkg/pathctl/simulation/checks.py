"""Monte Carlo checks of the verification theorem and the dynamic programming principle."""
from typing import List, Sequence

import numpy as np

from pathctl.helpers.constants import (
    DETERMINISTIC_RTOL,
    DOMINANCE_BAND,
    EQUALITY_BAND,
    MIN_STRICTLY_WORSE,
    STRICT_BAND,
)
from pathctl.helpers.errors import DomainMismatchError, GridAlignmentError
from pathctl.helpers.helpers import combined_stderr, grid_steps, same_step
from pathctl.helpers.logger import LOGGER
from pathctl.simulation.engine import LQCost, TerminalFunctional, simulate_paths
from pathctl.simulation.history import AdaptedHistory
from pathctl.simulation.models import CostEstimate, DppReport, EstimateRecord, SimConfig, VerificationReport
from pathctl.simulation.policies import (
    BridgePolicy,
    ConstantPolicy,
    ControlPolicy,
    FeedbackPolicy,
    PerturbedPolicy,
    ZeroPolicy,
)
from pathctl.solver.lq_delay import batch_value, eval_value
from pathctl.solver.models import LQParams
from pathctl.solver.surfaces import Surfaces

BANDS = {
    "equality": EQUALITY_BAND,
    "dominance": DOMINANCE_BAND,
    "strict": STRICT_BAND,
    "deterministic_rtol": DETERMINISTIC_RTOL,
}


def default_rivals(optimal: ControlPolicy) -> List[ControlPolicy]:
    return [
        ZeroPolicy(),
        PerturbedPolicy(optimal, shift=0.5),
        PerturbedPolicy(optimal, scale=1.2),
        ConstantPolicy(1.0),
    ]


def default_bridges() -> List[ControlPolicy]:
    return [ZeroPolicy(), ConstantPolicy(1.0)]


def _check_step(s: Surfaces, cfg: SimConfig) -> None:
    if not same_step(s.dt, cfg.dt_sim):
        raise GridAlignmentError(f"dt_sim={cfg.dt_sim} must equal the solver step {s.dt}")


def dominates(rival: CostEstimate, reference: CostEstimate, band: float = DOMINANCE_BAND) -> bool:
    return rival.mean >= reference.mean - band * combined_stderr(rival.stderr, reference.stderr)


def strictly_worse_than(rival: CostEstimate, reference: CostEstimate, band: float = STRICT_BAND) -> bool:
    return rival.mean - reference.mean > band * combined_stderr(rival.stderr, reference.stderr)


def matches_value(value: float, estimate: CostEstimate) -> bool:
    """
    Equality of V with a cost estimate up to EQUALITY_BAND standard errors. Without noise the
    estimate has no standard error, and the discretisation gap is bounded relative to |V| instead.
    """
    if estimate.stderr > 0:
        return abs(value - estimate.mean) <= EQUALITY_BAND * estimate.stderr
    return abs(value - estimate.mean) <= DETERMINISTIC_RTOL * abs(value)


def verification_check(
    s: Surfaces,
    params: LQParams,
    cfg: SimConfig,
    rivals: Sequence[ControlPolicy],
    threads: int = 1,
    min_strictly_worse: int = MIN_STRICTLY_WORSE,
) -> VerificationReport:
    if len(rivals) == 0:
        raise ValueError("verification_check needs at least one rival policy")
    _check_step(s, cfg)
    y0 = float(cfg.initial_states(1)[0])
    value = eval_value(s, 0.0, y0, cfg.history_path(params.tau))

    optimal = FeedbackPolicy(s)
    cost = LQCost(params)
    reference = simulate_paths([optimal], cost, params, cfg, threads=threads).estimate()
    flags = {"value_matches_optimal": matches_value(value, reference)}
    estimates = [EstimateRecord.of(optimal.label, reference)]
    strictly_worse = []

    for rival in rivals:
        estimate = simulate_paths([rival], cost, params, cfg, threads=threads).estimate()
        estimates.append(EstimateRecord.of(rival.label, estimate))
        flags[f"dominates[{rival.label}]"] = dominates(estimate, reference)
        if strictly_worse_than(estimate, reference):
            strictly_worse.append(rival.label)
    flags[f"strictly_worse>={min_strictly_worse}"] = len(strictly_worse) >= min_strictly_worse

    LOGGER.info(f"Verification: V={value:.6f}, J(feedback)={reference.mean:.6f} +/- {reference.stderr:.6f}, flags={flags}")
    return VerificationReport(
        V=value,
        estimates=estimates,
        strictly_worse=strictly_worse,
        flags=flags,
        seed=cfg.seed,
        params=params,
        grid=s.grid,
        bands=BANDS,
    )


def value_at_stop(s: Surfaces, u: float) -> TerminalFunctional:
    """Terminal functional evaluating the value functional on the simulated prefix at time u."""
    n = s.time_index(u)
    m = s.delay_steps

    def terminal(history: AdaptedHistory) -> np.ndarray:
        x = history.state_now()[:, 0]
        windows = history.control_window(history.step - m, history.step)[:, 0, :]
        return batch_value(s, n, x, windows)[:, None]

    return terminal


def dpp_check(
    s: Surfaces,
    params: LQParams,
    cfg: SimConfig,
    u: float,
    bridge_policies: Sequence[ControlPolicy],
    threads: int = 1,
    strict: bool = True,
) -> DppReport:
    """
    Estimates E[int_0^u f ds + V(u, X_u, Z_u)] for each bridge. The optimal feedback
    bridge is always estimated and serves as the reference. With strict set, every head
    must also cost more than the reference by STRICT_BAND combined standard errors.
    """
    _check_step(s, cfg)
    steps = grid_steps(u, cfg.dt_sim, what=f"u={u!r}")
    if not 0 < steps <= grid_steps(params.horizon, cfg.dt_sim, what="horizon"):
        raise DomainMismatchError(f"u={u} must lie in (0, {params.horizon}]")

    y0 = float(cfg.initial_states(1)[0])
    value = eval_value(s, 0.0, y0, cfg.history_path(params.tau))
    optimal = FeedbackPolicy(s)
    cost = LQCost(params)
    terminal = value_at_stop(s, u)

    def bridge_estimate(head: ControlPolicy) -> CostEstimate:
        bridge = BridgePolicy(head, optimal, switch_time=u)
        result = simulate_paths([bridge], cost, params, cfg, threads=threads, stop_time=u, terminal=terminal)
        return result.estimate()

    reference = bridge_estimate(optimal)
    flags = {"optimal_bridge_matches_value": matches_value(value, reference)}
    estimates = [EstimateRecord.of(optimal.label, reference)]
    for head in bridge_policies:
        estimate = bridge_estimate(head)
        estimates.append(EstimateRecord.of(head.label, estimate))
        flags[f"dominates[{head.label}]"] = dominates(estimate, reference)
        if strict:
            flags[f"exceeds[{head.label}]"] = strictly_worse_than(estimate, reference)

    LOGGER.info(f"DPP at u={u}: V={value:.6f}, reference={reference.mean:.6f} +/- {reference.stderr:.6f}, flags={flags}")
    return DppReport(
        V=value,
        u=u,
        estimates=estimates,
        flags=flags,
        seed=cfg.seed,
        params=params,
        grid=s.grid,
        bands=BANDS,
    )
