# The MIT License (MIT)
# Copyright © 2024 Pathctl

# Permission is hereby granted, free of charge, to any person obtaining a copy of this software and associated
# documentation files (the “Software”), to deal in the Software without restriction, including without limitation
# the rights to use, copy, modify, merge, publish, distribute, sublicense, and/or sell copies of the Software,
# and to permit persons to whom the Software is furnished to do so, subject to the following conditions:

# The above copyright notice and this permission notice shall be included in all copies or substantial portions of
# the Software.

# THE SOFTWARE IS PROVIDED “AS IS”, WITHOUT WARRANTY OF ANY KIND, EXPRESS OR IMPLIED, INCLUDING BUT NOT LIMITED TO
# THE WARRANTIES OF MERCHANTABILITY, FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL
# THE AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER LIABILITY, WHETHER IN AN ACTION
# OF CONTRACT, TORT OR OTHERWISE, ARISING FROM, OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER
# DEALINGS IN THE SOFTWARE.

import argparse
import sys
from pathlib import Path
from typing import List, Optional

import yaml
from pydantic import ValidationError

from pathctl.experiment import MODES, USAGE_EXIT, ExperimentConfig, emit_plotdata, run
from pathctl.helpers.classes import dict_to_basemodel
from pathctl.helpers.logger import LOGGER, set_console_level
from pathctl.utils.config import add_args, add_plot_args, check_config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pathctl",
        description="Delayed path-dependent LQ control: solve, simulate and verify.",
    )
    subparsers = parser.add_subparsers(dest="command")
    for mode in MODES:
        add_args(subparsers.add_parser(mode, help=f"Run the {mode} pipeline from a config file."))
    add_plot_args(subparsers.add_parser("emit-plot", help="Export a saved surface as long-format CSV."))
    return parser


def load_experiment(path: str, mode: str, args: argparse.Namespace) -> Optional[dict]:
    """Raw config mapping with command-line overrides applied, or None when the file holds nothing."""
    data = yaml.safe_load(Path(path).expanduser().read_text())
    if not data:
        return None
    if not isinstance(data, dict):
        raise ValueError(f"Config {path} must hold a mapping, got {type(data).__name__}")

    data["mode"] = mode
    if args.output is not None:
        data["output_dir"] = args.output
    if args.cross_factor is not None:
        data["cross_factor_policy"] = args.cross_factor
    if args.seed is not None:
        data["seed"] = args.seed
        if isinstance(data.get("sim"), dict):
            data["sim"]["seed"] = args.seed
    return data


def report_validation_error(error: ValidationError) -> None:
    for detail in error.errors():
        key = ".".join(str(part) for part in detail["loc"]) or "<config>"
        LOGGER.error(f"Invalid config key '{key}': {detail['msg']}")


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command is None:
        parser.print_usage(sys.stderr)
        return USAGE_EXIT

    if args.command == "emit-plot":
        set_console_level(LOGGER, args.log_level)
        try:
            emit_plotdata(args.surfaces, args.slice_spec, args.output)
        except (FileNotFoundError, ValueError) as e:
            LOGGER.error(f"emit-plot failed: {e}")
            return USAGE_EXIT
        return 0

    if args.config is None:
        parser.print_usage(sys.stderr)
        LOGGER.error(f"{args.command} needs --config")
        return USAGE_EXIT

    try:
        data = load_experiment(args.config, args.command, args)
    except (OSError, yaml.YAMLError, ValueError) as e:
        LOGGER.error(f"Could not read config {args.config}: {e}")
        return USAGE_EXIT
    if data is None:
        parser.print_usage(sys.stderr)
        LOGGER.error(f"Config {args.config} is empty")
        return USAGE_EXIT

    try:
        config = dict_to_basemodel(ExperimentConfig, data)
    except ValidationError as e:
        report_validation_error(e)
        return USAGE_EXIT

    args.output = str(config.output_dir)
    try:
        check_config(args)
    except ValueError as e:
        LOGGER.error(str(e))
        return USAGE_EXIT
    config.output_dir = Path(args.output)

    LOGGER.info(f"Running {config.mode} into {config.output_dir}")
    return run(config, threads=args.threads)


if __name__ == "__main__":
    sys.exit(main())
