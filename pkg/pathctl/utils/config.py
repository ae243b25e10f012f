import argparse
import os

from pathctl.helpers.constants import CROSS_FACTORS, EVENTS_RETENTION_SIZE
from pathctl.helpers.logger import LOGGER, set_console_level
from .logging import close_events_logger, setup_events_logger


def check_config(config: argparse.Namespace):
    r"""Checks/validates the config namespace object and opens the run's events log."""
    if config.threads < 1:
        raise ValueError(f"--threads must be at least 1, got {config.threads}")
    set_console_level(LOGGER, config.log_level)

    if config.output is not None:
        config.output = os.path.expanduser(config.output)
        os.makedirs(config.output, exist_ok=True)

    if config.output is not None and not config.dont_save_events:
        # Add custom event logger for the events.
        config.events_logger = setup_events_logger(config.output, config.events_retention_size)
    else:
        close_events_logger()
        config.events_logger = None


def add_args(parser: argparse.ArgumentParser):
    """
    Adds the flags shared by every subcommand. Flags override values from the config file.
    """

    parser.add_argument(
        "--config",
        type=str,
        help="Experiment config file (JSON; YAML is accepted as well).",
        default=None,
    )

    parser.add_argument(
        "--output",
        type=str,
        help="Directory for surfaces, reports and events.log. Overrides output_dir.",
        default=None,
    )

    parser.add_argument(
        "--seed",
        type=int,
        help="Monte Carlo seed (unsigned 64-bit). Overrides sim.seed.",
        default=None,
    )

    parser.add_argument(
        "--threads",
        type=int,
        help="Worker threads for Monte Carlo simulation. Results do not depend on it.",
        default=1,
    )

    parser.add_argument(
        "--cross-factor",
        dest="cross_factor",
        choices=["auto", *CROSS_FACTORS],
        help="Cross factor of the transport source: select by residual, or fix it. Overrides cross_factor_policy.",
        default=None,
    )

    parser.add_argument(
        "--log-level",
        dest="log_level",
        type=str,
        help="Console log level.",
        default=os.environ.get("PATHCTL_LOG_LEVEL", "INFO"),
    )

    parser.add_argument(
        "--events-retention-size",
        dest="events_retention_size",
        type=int,
        help="Events retention size in bytes.",
        default=EVENTS_RETENTION_SIZE,
    )

    parser.add_argument(
        "--dont-save-events",
        dest="dont_save_events",
        action="store_true",
        help="If set, we dont save events to a log file.",
        default=False,
    )


def add_plot_args(parser: argparse.ArgumentParser):
    """Flags of the emit-plot subcommand."""

    parser.add_argument(
        "--surfaces",
        type=str,
        required=True,
        help="Directory holding saved surfaces and meta.json.",
    )

    parser.add_argument(
        "--slice",
        dest="slice_spec",
        type=str,
        required=True,
        help="Surface to export: f0, f1, f2, f3 (e0..e3 for a game), optionally at a time as f2@0.5.",
    )

    parser.add_argument(
        "--output",
        type=str,
        required=True,
        help="CSV file to write.",
    )

    parser.add_argument(
        "--log-level",
        dest="log_level",
        type=str,
        help="Console log level.",
        default=os.environ.get("PATHCTL_LOG_LEVEL", "INFO"),
    )
