import json

import numpy as np
import pandas as pd
import pytest

from pathctl.cli import main
from pathctl.experiment import ExperimentConfig, RunOutcome, emit_plotdata, run
from pathctl.helpers.classes import dict_to_basemodel
from pathctl.helpers.constants import REFERENCE_PARAMS
from pathctl.simulation import SimConfig
from pathctl.solver import GameParams


def write_config(path, **sections) -> str:
    config = {"params": dict(REFERENCE_PARAMS), "cross_factor_policy": "one", **sections}
    path.write_text(json.dumps(config))
    return str(path)


def run_cli(*argv) -> int:
    return main([*argv, "--dont-save-events"]) if argv[0] != "emit-plot" else main(list(argv))


def test_solve_writes_surfaces_and_is_deterministic(tmp_path):
    config = write_config(tmp_path / "solve.json")
    for name in ("first", "second"):
        assert run_cli("solve", "--config", config, "--output", str(tmp_path / name)) == 0

    for name in ("f0.csv", "f1.csv", "f2.csv", "f3.csv", "meta.json"):
        first = (tmp_path / "first" / "surfaces" / name).read_bytes()
        assert first == (tmp_path / "second" / "surfaces" / name).read_bytes()
    assert (tmp_path / "first" / "report_solve.json").read_bytes() == (tmp_path / "second" / "report_solve.json").read_bytes()

    meta = json.loads((tmp_path / "first" / "surfaces" / "meta.json").read_text())
    assert meta["cross_factor"] == 1.0
    assert meta["cross_factor_policy"] == "one"
    assert meta["params"]["tau"] == 0.05


def test_auto_cross_factor_is_recorded(tmp_path):
    config = write_config(tmp_path / "solve.json", cross_factor_policy="auto")
    assert run_cli("solve", "--config", config, "--output", str(tmp_path / "run")) == 0
    meta = json.loads((tmp_path / "run" / "surfaces" / "meta.json").read_text())
    assert meta["cross_factor_policy"] == "auto"
    assert set(meta["cross_factor_selection"]["residuals"]) == {"half", "one"}


def test_events_are_logged(tmp_path):
    config = write_config(tmp_path / "solve.json")
    assert main(["solve", "--config", config, "--output", str(tmp_path / "run")]) == 0
    assert "solve finished" in (tmp_path / "run" / "events.log").read_text()


def test_empty_config_is_a_usage_error(tmp_path, capsys):
    config = tmp_path / "empty.json"
    config.write_text("")
    assert run_cli("solve", "--config", str(config)) == 2
    assert "usage" in capsys.readouterr().err


def test_missing_command_or_config(tmp_path):
    assert main([]) == 2
    assert run_cli("solve") == 2
    assert run_cli("solve", "--config", str(tmp_path / "nope.json")) == 2


@pytest.mark.parametrize(
    "sections",
    [
        {"params": {**REFERENCE_PARAMS, "tau": -1.0}},
        {"params": {**REFERENCE_PARAMS, "delay": 1.0}},
        {"grid": {"dt": 0.03}},
        {"cross_factor_policy": "quarter"},
    ],
)
def test_invalid_config_is_a_usage_error(tmp_path, sections):
    config = write_config(tmp_path / "bad.json", **sections)
    assert run_cli("solve", "--config", config, "--output", str(tmp_path / "run")) == 2


def test_simulation_modes_need_sim_section():
    with pytest.raises(ValueError, match="sim"):
        ExperimentConfig.model_validate({"mode": "verify", "params": REFERENCE_PARAMS})
    with pytest.raises(ValueError, match="n_players"):
        ExperimentConfig.model_validate({"mode": "game", "params": REFERENCE_PARAMS, "sim": {"dt_sim": 0.005}})


def test_config_loading_only_takes_models():
    config = dict_to_basemodel(ExperimentConfig, {"mode": "solve", "params": REFERENCE_PARAMS, "grid": {"dt": 0.01}})
    assert config.solver_grid().dt == 0.01
    with pytest.raises(TypeError):
        dict_to_basemodel(RunOutcome, {"flags": {}})


def test_sim_step_must_match_grid():
    with pytest.raises(ValueError, match="dt_sim"):
        ExperimentConfig.model_validate(
            {"mode": "simulate", "params": REFERENCE_PARAMS, "grid": {"dt": 0.005}, "sim": {"dt_sim": 0.01}}
        )
    config = ExperimentConfig.model_validate({"mode": "simulate", "params": REFERENCE_PARAMS, "sim": {"dt_sim": 0.01}})
    assert config.solver_grid().dt == 0.01


@pytest.mark.parametrize("u", [0.5001, 0.0, 1.5])
def test_off_grid_switching_time_is_a_usage_error(tmp_path, u):
    config = write_config(tmp_path / "dpp.json", sim={"n_paths": 10, "dt_sim": 0.005}, u=u)
    assert run_cli("dpp", "--config", config, "--output", str(tmp_path / "run")) == 2
    with pytest.raises(ValueError, match="'u'"):
        ExperimentConfig.model_validate(
            {"mode": "dpp", "params": REFERENCE_PARAMS, "sim": {"dt_sim": 0.005}, "u": u}
        )


@pytest.mark.parametrize("player", [7, 3, -1])
def test_player_out_of_range_is_a_usage_error(tmp_path, player):
    params = {**REFERENCE_PARAMS, "n_players": 3}
    config = write_config(tmp_path / "game.json", params=params, sim={"n_paths": 10, "dt_sim": 0.005}, player=player)
    assert run_cli("game", "--config", config, "--output", str(tmp_path / "run")) == 2
    with pytest.raises(ValueError, match="'player'"):
        ExperimentConfig.model_validate({"mode": "game", "params": params, "sim": {"dt_sim": 0.005}, "player": player})


def test_pipeline_errors_map_to_usage_exit(tmp_path):
    params = GameParams(**REFERENCE_PARAMS, n_players=3)
    config = ExperimentConfig.model_construct(
        mode="game",
        params=params,
        sim=SimConfig(n_paths=4, dt_sim=0.005),
        output_dir=tmp_path / "run",
        cross_factor_policy="one",
        player=7,
    )
    assert run(config) == 2


def test_game_params_are_recognised():
    config = ExperimentConfig.model_validate(
        {"mode": "game", "params": {**REFERENCE_PARAMS, "n_players": 4}, "sim": {"dt_sim": 0.005}}
    )
    assert config.params.n_players == 4
    assert config.single_params.model_dump() == REFERENCE_PARAMS


def test_blow_up_exits_with_failure(tmp_path):
    config = write_config(tmp_path / "solve.json", params={**REFERENCE_PARAMS, "c": -50.0})
    assert run_cli("solve", "--config", config, "--output", str(tmp_path / "run")) == 1


def test_simulate_dumps_costs(tmp_path):
    config = write_config(tmp_path / "sim.json", sim={"n_paths": 50, "dt_sim": 0.005, "seed": 4}, dump_costs=True)
    assert run_cli("simulate", "--config", config, "--output", str(tmp_path / "run"), "--threads", "2") == 0
    costs = pd.read_csv(tmp_path / "run" / "costs.csv")
    assert list(costs.columns) == ["path_id", "cost"]
    assert len(costs) == 50
    report = json.loads((tmp_path / "run" / "report_simulate.json").read_text())
    assert report["seed"] == 4
    assert report["estimates"][0]["n"] == 50


def test_seed_flag_overrides_config(tmp_path):
    config = write_config(tmp_path / "sim.json", sim={"n_paths": 20, "dt_sim": 0.005, "seed": 4})
    assert run_cli("simulate", "--config", config, "--output", str(tmp_path / "run"), "--seed", "11") == 0
    assert json.loads((tmp_path / "run" / "report_simulate.json").read_text())["seed"] == 11


def test_ito_check_with_predictable_functional(tmp_path):
    config = write_config(tmp_path / "ito.json", ito={"levels": [0.04, 0.01], "n_paths": 5, "functionals": ["running_integral"]})
    assert run_cli("ito-check", "--config", config, "--output", str(tmp_path / "run")) == 0
    report = json.loads((tmp_path / "run" / "report_ito.json").read_text())
    assert report["flags"] == {"shrinking[running_integral]": True}


@pytest.fixture
def solved(tmp_path):
    config = write_config(tmp_path / "solve.json")
    assert run_cli("solve", "--config", config, "--output", str(tmp_path / "run")) == 0
    return tmp_path / "run" / "surfaces"


def test_emit_plot_f0(solved, tmp_path):
    assert run_cli("emit-plot", "--surfaces", str(solved), "--slice", "f0", "--output", str(tmp_path / "f0.csv")) == 0
    frame = pd.read_csv(tmp_path / "f0.csv")
    assert list(frame.columns) == ["t", "value"]
    assert len(frame) == 201


def test_emit_plot_kernel_slice_is_symmetric(solved, tmp_path):
    output = emit_plotdata(solved, "f2@0.5", tmp_path / "f2.csv")
    frame = pd.read_csv(output)
    assert list(frame.columns) == ["theta1", "theta2", "value"]
    matrix = frame.pivot(index="theta1", columns="theta2", values="value").to_numpy()
    assert matrix.shape == (11, 11)
    assert np.array_equal(matrix, matrix.T)


def test_emit_plot_f1_long_format(solved, tmp_path):
    frame = pd.read_csv(emit_plotdata(solved, "f1", tmp_path / "f1.csv"))
    assert list(frame.columns) == ["t", "theta", "value"]
    assert len(frame) == 201 * 11


@pytest.mark.parametrize("slice_spec", ["f7", "e0", "f1@0.5003"])
def test_emit_plot_rejects_bad_slices(solved, tmp_path, slice_spec):
    assert run_cli("emit-plot", "--surfaces", str(solved), "--slice", slice_spec, "--output", str(tmp_path / "x.csv")) == 2


def test_emit_plot_missing_surfaces(tmp_path):
    assert run_cli("emit-plot", "--surfaces", str(tmp_path / "none"), "--slice", "f0", "--output", str(tmp_path / "x.csv")) == 2


@pytest.mark.slow
def test_verify_passes_for_reference_params(tmp_path):
    config = write_config(tmp_path / "verify.json", sim={"n_paths": 10_000, "dt_sim": 0.005, "y0": 1.0})
    assert run_cli("verify", "--config", config, "--output", str(tmp_path / "run"), "--threads", "4") == 0
    report = json.loads((tmp_path / "run" / "report_verify.json").read_text())
    assert all(report["flags"].values())
    assert {record["policy"] for record in report["estimates"]} >= {"feedback", "zero", "constant 1"}


@pytest.mark.slow
def test_converge_writes_refinement_tables(tmp_path):
    config = write_config(
        tmp_path / "converge.json",
        params={**REFERENCE_PARAMS, "n_players": 3},
        n_probes=20,
    )
    assert run_cli("converge", "--config", config, "--output", str(tmp_path / "run")) == 0
    refinement = pd.read_csv(tmp_path / "run" / "refinement.csv")
    assert list(refinement.columns) == ["dt", "max_residual", "slope"]
    assert len(refinement) == 3
    ladder = pd.read_csv(tmp_path / "run" / "n_ladder.csv")
    assert ladder["n_players"].tolist() == [2, 10, 50, 100]
    assert (tmp_path / "run" / "game_refinement.csv").exists()
