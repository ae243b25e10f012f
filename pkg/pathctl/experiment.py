"""Experiment configs and the pipelines behind every CLI subcommand."""
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator
from rich.console import Console
from rich.table import Table

from pathctl.helpers.constants import (
    CROSS_FACTORS,
    ITO_LEVELS,
    MAX_N_LADDER_RATIO,
    MIN_CONVERGENCE_SLOPE,
    N_LADDER,
    RESIDUAL_LADDER,
)
from pathctl.helpers.errors import GridAlignmentError, PathControlError
from pathctl.helpers.helpers import grid_steps, read_json, same_step, write_json
from pathctl.helpers.logger import LOGGER
from pathctl.game import (
    GameFeedbackPolicy,
    default_deviations,
    game_probe_residual,
    n_ladder,
    nash_deviation_check,
    select_game_cross_factor,
    solve_e_system,
)
from pathctl.paths.calculus import (
    cylindrical,
    is_shrinking,
    ito_refinement_study,
    last_value,
    product,
    running_integral,
)
from pathctl.simulation import (
    EstimateRecord,
    FeedbackPolicy,
    LQCost,
    SimConfig,
    default_bridges,
    default_rivals,
    dpp_check,
    simulate_paths,
    verification_check,
)
from pathctl.solver import (
    ConvergenceTable,
    CrossFactorSelection,
    GameParams,
    LQParams,
    SolverDefaults,
    SolverGrid,
    Surfaces,
    eval_value,
    load_surfaces,
    probe_residual,
    residual_ladder,
    save_surfaces,
    select_cross_factor,
    solve_f_system,
)
from pathctl.solver.surfaces import surface_frames
from pathctl.utils.logging import log_event

Mode = Literal["solve", "simulate", "verify", "dpp", "game", "ito-check", "converge"]
MODES: Tuple[str, ...] = ("solve", "simulate", "verify", "dpp", "game", "ito-check", "converge")
USAGE_EXIT: int = 2

ITO_FUNCTIONALS: Dict[str, Callable] = {
    "square": cylindrical(lambda t, y: y * y),
    "running_integral": running_integral,
    "state_times_integral": product(last_value, running_integral),
}

console = Console()


class GridSpec(BaseModel):
    """Either dt or steps_per_delay; without both the simulation step (or the default ratio) is used."""
    model_config = ConfigDict(extra="forbid")

    dt: Optional[float] = None
    steps_per_delay: Optional[int] = None

    def resolve(self, params: LQParams, fallback_dt: Optional[float] = None) -> SolverGrid:
        if self.dt is not None:
            return SolverGrid.for_params(params, dt=self.dt)
        if self.steps_per_delay is not None:
            return SolverGrid.for_params(params, steps_per_delay=self.steps_per_delay)
        if fallback_dt is not None:
            return SolverGrid.for_params(params, dt=fallback_dt)
        return SolverGrid.for_params(params, steps_per_delay=SolverDefaults.STEPS_PER_DELAY)


class ItoSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    levels: List[float] = Field(default_factory=lambda: list(ITO_LEVELS))
    n_paths: int = 100
    functionals: List[Literal["square", "running_integral", "state_times_integral"]] = Field(
        default_factory=lambda: list(ITO_FUNCTIONALS)
    )


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", arbitrary_types_allowed=True)

    mode: Mode
    params: Union[GameParams, LQParams]
    grid: GridSpec = Field(default_factory=GridSpec)
    sim: Optional[SimConfig] = None
    output_dir: Path = Path("pathctl-run")
    cross_factor_policy: Literal["auto", "half", "one"] = "auto"
    seed: Optional[int] = None
    u: Optional[float] = None
    player: int = 0
    ladder: List[int] = Field(default_factory=lambda: list(RESIDUAL_LADDER))
    n_players_ladder: List[int] = Field(default_factory=lambda: list(N_LADDER))
    n_probes: int = SolverDefaults.N_PROBES
    ito: ItoSpec = Field(default_factory=ItoSpec)
    dump_costs: bool = False

    @model_validator(mode="after")
    def check_sections(self) -> "ExperimentConfig":
        if self.mode in ("simulate", "verify", "dpp", "game") and self.sim is None:
            raise ValueError(f"mode '{self.mode}' needs a 'sim' section")
        if self.mode == "game" and not isinstance(self.params, GameParams):
            raise ValueError("mode 'game' needs 'params.n_players'")
        if len(self.ladder) < 2:
            raise ValueError(f"'ladder' needs at least two grids, got {self.ladder}")
        try:
            grid = self.solver_grid()
        except PathControlError as e:
            raise ValueError(f"'grid' does not fit the params: {e}") from e
        if self.sim is not None and not same_step(grid.dt, self.sim.dt_sim):
            raise ValueError(f"'sim.dt_sim'={self.sim.dt_sim} must equal the solver step {grid.dt}")
        if self.u is not None:
            try:
                steps = grid_steps(self.u, grid.dt, what="'u'")
            except GridAlignmentError as e:
                raise ValueError(f"'u' must lie on the solver grid: {e}") from e
            if not 0 < steps <= grid_steps(self.params.horizon, grid.dt, what="horizon"):
                raise ValueError(f"'u'={self.u} must lie in (0, {self.params.horizon}]")
        if isinstance(self.params, GameParams) and not 0 <= self.player < self.params.n_players:
            raise ValueError(f"'player'={self.player} must lie in [0, {self.params.n_players})")
        return self

    @property
    def single_params(self) -> LQParams:
        return self.params.single_agent() if isinstance(self.params, GameParams) else self.params

    @property
    def effective_seed(self) -> int:
        if self.seed is not None:
            return self.seed
        return self.sim.seed if self.sim is not None else 0

    def solver_grid(self) -> SolverGrid:
        return self.grid.resolve(self.single_params, None if self.sim is None else self.sim.dt_sim)


@dataclass
class RunOutcome:
    flags: Dict[str, bool] = field(default_factory=dict)
    artifacts: List[Path] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.flags.values())


def resolve_cross_factor(config: ExperimentConfig, game: bool = False) -> Tuple[float, Optional[CrossFactorSelection]]:
    if config.cross_factor_policy != "auto":
        return CROSS_FACTORS[config.cross_factor_policy], None
    if game:
        selection = select_game_cross_factor(config.params, seed=config.effective_seed)
    else:
        selection = select_cross_factor(config.single_params, seed=config.effective_seed)
    log_event(f"cross factor selected: {selection.cross_factor}")
    return selection.cross_factor, selection


def _selection_payload(selection: Optional[CrossFactorSelection]) -> Optional[dict]:
    if selection is None:
        return None
    return {
        "residuals": selection.residuals,
        "slopes": selection.slopes,
        "steps_per_delay": list(selection.steps_per_delay),
    }


def _save(
    config: ExperimentConfig, s: Surfaces, selection: Optional[CrossFactorSelection], outcome: RunOutcome
) -> None:
    directory = save_surfaces(s, config.output_dir / "surfaces")
    meta = read_json(directory / "meta.json")
    meta["cross_factor_policy"] = config.cross_factor_policy
    meta["cross_factor_selection"] = _selection_payload(selection)
    write_json(directory / "meta.json", meta)
    outcome.artifacts.append(directory)
    log_event(f"surfaces saved to {directory}")


def _solve(config: ExperimentConfig, outcome: RunOutcome) -> Tuple[Surfaces, Optional[CrossFactorSelection]]:
    kappa, selection = resolve_cross_factor(config)
    s = solve_f_system(config.single_params, config.solver_grid(), kappa)
    _save(config, s, selection, outcome)
    return s, selection


def _write_report(config: ExperimentConfig, name: str, payload: Any, outcome: RunOutcome) -> None:
    path = write_json(config.output_dir / f"report_{name}.json", payload)
    outcome.artifacts.append(path)
    log_event(f"report written to {path}")


def run_solve(config: ExperimentConfig, threads: int) -> RunOutcome:
    outcome = RunOutcome()
    s, selection = _solve(config, outcome)
    outcome.flags.update(s.invariant_flags())
    _write_report(config, "solve", {
        "flags": outcome.flags,
        "cross_factor": s.cross_factor,
        "cross_factor_selection": _selection_payload(selection),
        "max_abs": s.max_abs(),
        "params": s.params,
        "grid": s.grid,
    }, outcome)
    return outcome


def run_simulate(config: ExperimentConfig, threads: int) -> RunOutcome:
    outcome = RunOutcome()
    s, _ = _solve(config, outcome)
    params, cfg = config.single_params, config.sim
    policy = FeedbackPolicy(s)
    result = simulate_paths([policy], LQCost(params), params, cfg, threads=threads)
    estimate = result.estimate()
    outcome.flags["finite_costs"] = bool(np.isfinite(result.costs).all())
    value = eval_value(s, 0.0, float(cfg.initial_states(1)[0]), cfg.history_path(params.tau))
    _write_report(config, "simulate", {
        "V": value,
        "estimates": [EstimateRecord.of(policy.label, estimate)],
        "flags": outcome.flags,
        "seed": cfg.seed,
        "params": params,
        "grid": s.grid,
    }, outcome)
    if config.dump_costs:
        path = config.output_dir / "costs.csv"
        pd.DataFrame({"path_id": np.arange(cfg.n_paths), "cost": result.costs[:, 0]}).to_csv(path, index=False)
        outcome.artifacts.append(path)
    return outcome


def run_verify(config: ExperimentConfig, threads: int) -> RunOutcome:
    outcome = RunOutcome()
    s, _ = _solve(config, outcome)
    report = verification_check(s, config.single_params, config.sim, default_rivals(FeedbackPolicy(s)), threads=threads)
    outcome.flags.update(report.flags)
    _write_report(config, "verify", report, outcome)
    return outcome


def run_dpp(config: ExperimentConfig, threads: int) -> RunOutcome:
    outcome = RunOutcome()
    s, _ = _solve(config, outcome)
    params = config.single_params
    u = config.u if config.u is not None else params.horizon / 2
    report = dpp_check(s, params, config.sim, u, default_bridges(), threads=threads)
    outcome.flags.update(report.flags)
    _write_report(config, "dpp", report, outcome)
    return outcome


def run_game(config: ExperimentConfig, threads: int) -> RunOutcome:
    outcome = RunOutcome()
    params: GameParams = config.params
    kappa, selection = resolve_cross_factor(config, game=True)
    s = solve_e_system(params, config.solver_grid(), kappa)
    _save(config, s, selection, outcome)
    outcome.flags.update(s.invariant_flags())

    report = nash_deviation_check(
        s, params, config.sim, config.player, default_deviations(GameFeedbackPolicy(s)), threads=threads
    )
    outcome.flags.update(report.flags)
    payload = report.model_dump()
    payload["flags"] = outcome.flags
    payload["params"] = params
    payload["cross_factor"] = kappa
    payload["cross_factor_selection"] = _selection_payload(selection)
    _write_report(config, "game", payload, outcome)
    return outcome


def run_ito_check(config: ExperimentConfig, threads: int) -> RunOutcome:
    outcome = RunOutcome()
    params = config.single_params
    medians = {}
    for name in config.ito.functionals:
        medians[name] = ito_refinement_study(
            ITO_FUNCTIONALS[name],
            config.ito.levels,
            n_paths=config.ito.n_paths,
            seed=config.effective_seed,
            sigma=params.sigma,
            horizon=params.horizon,
        )
        outcome.flags[f"shrinking[{name}]"] = is_shrinking(medians[name])
    _write_report(config, "ito", {
        "levels": config.ito.levels,
        "medians": medians,
        "n_paths": config.ito.n_paths,
        "flags": outcome.flags,
        "seed": config.effective_seed,
    }, outcome)
    return outcome


def _finite_or_none(value: float) -> Optional[float]:
    return float(value) if np.isfinite(value) else None


def _table_frame(table: ConvergenceTable) -> pd.DataFrame:
    return pd.DataFrame({
        "dt": [row.dt for row in table.rows],
        "max_residual": [row.max_residual for row in table.rows],
        "slope": [row.slope for row in table.rows],
    })


def run_converge(config: ExperimentConfig, threads: int) -> RunOutcome:
    outcome = RunOutcome()
    params = config.single_params
    kappa, selection = resolve_cross_factor(config)
    table = residual_ladder(
        lambda grid: solve_f_system(params, grid, kappa),
        probe_residual,
        params,
        config.ladder,
        config.n_probes,
        config.effective_seed,
    )
    path = config.output_dir / "refinement.csv"
    _table_frame(table).to_csv(path, index=False)
    outcome.artifacts.append(path)
    outcome.flags["residual_slope"] = table.converges(MIN_CONVERGENCE_SLOPE)
    payload: Dict[str, Any] = {
        "cross_factor": kappa,
        "cross_factor_selection": _selection_payload(selection),
        "slope": _finite_or_none(table.slope),
        "rows": table.rows,
        "params": config.params,
    }
    render_table("Residual refinement", _table_frame(table))

    if isinstance(config.params, GameParams):
        game_kappa, game_selection = resolve_cross_factor(config, game=True)
        game_table = residual_ladder(
            lambda grid: solve_e_system(config.params, grid, game_kappa),
            game_probe_residual,
            params,
            config.ladder,
            config.n_probes,
            config.effective_seed,
            n_players=config.params.n_players,
        )
        path = config.output_dir / "game_refinement.csv"
        _table_frame(game_table).to_csv(path, index=False)
        outcome.artifacts.append(path)
        outcome.flags["game_residual_slope"] = game_table.converges(MIN_CONVERGENCE_SLOPE)

        gaps = n_ladder(params, config.solver_grid(), config.n_players_ladder, game_kappa)
        frame = pd.DataFrame(gaps, columns=["n_players", "gap"])
        path = config.output_dir / "n_ladder.csv"
        frame.to_csv(path, index=False)
        outcome.artifacts.append(path)
        values = frame["gap"].to_numpy()
        outcome.flags["n_ladder_monotone"] = bool(np.all(np.diff(values) < 0))
        outcome.flags["n_ladder_ratio"] = bool(values[-1] <= MAX_N_LADDER_RATIO * values[0])
        payload.update({
            "game_cross_factor": game_kappa,
            "game_cross_factor_selection": _selection_payload(game_selection),
            "game_slope": _finite_or_none(game_table.slope),
            "game_rows": game_table.rows,
            "n_ladder": gaps,
        })
        render_table("Game residual refinement", _table_frame(game_table))

    payload["flags"] = outcome.flags
    _write_report(config, "converge", payload, outcome)
    return outcome


PIPELINES: Dict[str, Callable[[ExperimentConfig, int], RunOutcome]] = {
    "solve": run_solve,
    "simulate": run_simulate,
    "verify": run_verify,
    "dpp": run_dpp,
    "game": run_game,
    "ito-check": run_ito_check,
    "converge": run_converge,
}


def render_table(title: str, frame: pd.DataFrame) -> None:
    table = Table(title=title)
    for column in frame.columns:
        table.add_column(str(column))
    for row in frame.itertuples(index=False):
        table.add_row(*[f"{value:.6g}" if isinstance(value, float) else str(value) for value in row])
    console.print(table)


def render_flags(flags: Dict[str, bool]) -> None:
    table = Table(title="Report flags")
    table.add_column("flag")
    table.add_column("passed")
    for name, passed in flags.items():
        table.add_row(name, "[green]yes[/green]" if passed else "[red]no[/red]")
    console.print(table)


def run(config: ExperimentConfig, threads: int = 1) -> int:
    """
    Runs the configured pipeline; 0 when every report flag passes, 1 otherwise or on numerical
    failure, USAGE_EXIT when the config is rejected inside a pipeline.
    """
    config.output_dir.mkdir(parents=True, exist_ok=True)
    log_event(f"{config.mode} started")
    try:
        outcome = PIPELINES[config.mode](config, threads)
    except ArithmeticError as e:
        LOGGER.error(f"{config.mode} failed: {e}")
        log_event(f"{config.mode} failed: {e}")
        return 1
    except (PathControlError, ValueError) as e:
        LOGGER.error(f"{config.mode} rejected the config: {e}")
        log_event(f"{config.mode} rejected the config: {e}")
        return USAGE_EXIT
    render_flags(outcome.flags)
    log_event(f"{config.mode} finished, flags {outcome.flags}")
    return 0 if outcome.passed else 1


SLICE_PATTERN = re.compile(r"^([fe])([0-3])(?:@(.+))?$")


def emit_plotdata(surfaces_dir: Union[str, Path], slice_spec: str, output: Union[str, Path]) -> Path:
    """Long-format CSV of one surface, optionally at a single time node."""
    match = SLICE_PATTERN.match(slice_spec.strip())
    if match is None:
        raise ValueError(f"Slice {slice_spec!r} is not one of f0..f3 or e0..e3, optionally followed by @<time>")
    s = load_surfaces(surfaces_dir)
    if match.group(1) != s.prefix:
        raise ValueError(f"Slice {slice_spec!r} does not fit {s.kind} surfaces, use {s.prefix}0..{s.prefix}3")
    k = int(match.group(2))
    array = getattr(s, f"f{k}")
    times, thetas = s.times, s.thetas

    if match.group(3) is None:
        frame = surface_frames(s)[f"{s.prefix}{k}"]
    else:
        t = float(match.group(3))
        n = s.time_index(t)
        if k in (0, 3):
            frame = pd.DataFrame({"t": [times[n]], "value": [array[n]]})
        elif k == 1:
            frame = pd.DataFrame({"theta": thetas, "value": array[n]})
        else:
            theta1, theta2 = np.meshgrid(thetas, thetas, indexing="ij")
            frame = pd.DataFrame({"theta1": theta1.ravel(), "theta2": theta2.ravel(), "value": array[n].ravel()})

    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(output, index=False)
    LOGGER.info(f"Wrote {len(frame)} rows of {slice_spec} to {output}")
    return output
