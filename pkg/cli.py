# cli.py
# © 2025 Colt McVey
# Command-line entry point: run, sweep, plot-data and validate-config.

import sys
import logging
import argparse

import config
from errors import ConfigError, SimulatorError
from plot_data import PLOT_KINDS, emit_plots
from runner import RunResult, run_experiment, run_sweep
from settings_manager import DEFAULT_SETTINGS, PRESETS, SettingsManager, format_key_value


def _add_logging_flags(parser: argparse.ArgumentParser):
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--verbose", action="store_true", help="Log every round (DEBUG)")
    group.add_argument("--quiet", action="store_true", help="Only log warnings and errors")


def _add_settings_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="Settings file ('key = value' lines or .json)")
    parser.add_argument("--preset", choices=sorted(PRESETS), help="Start from a named experiment preset")
    parser.add_argument("--seed", type=int, help="Run a single seed instead of the configured list")
    parser.add_argument("--out-dir", help="Directory for CSV, manifest and plot files (default ./runs)")
    parser.add_argument("--lazy", action="store_true", default=None, help="Gossip with (I+P)/2")
    settings = parser.add_argument_group("settings", "Override any settings key (values parsed like the settings file)")
    for key in DEFAULT_SETTINGS:
        if key == "lazy":
            continue
        settings.add_argument(f"--{key.replace('_', '-')}", dest=f"set_{key}", metavar="VALUE")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=config.APP_NAME, description=config.APP_DESCRIPTION)
    parser.add_argument("--version", action="version", version=f"%(prog)s {config.APP_VERSION}")
    commands = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (("run", "Run one experiment over all seeds"),
                            ("sweep", "Run the experiment at every n in n_values"),
                            ("validate-config", "Validate settings and print the resolved configuration")):
        sub = commands.add_parser(name, help=help_text)
        _add_settings_flags(sub)
        _add_logging_flags(sub)

    plot = commands.add_parser("plot-data", help="Write plot series from run CSV files")
    plot.add_argument("csv", nargs="+", help="Run CSV files; the first is the ratio baseline")
    plot.add_argument("--kind", required=True, choices=PLOT_KINDS)
    plot.add_argument("--out-dir", help="Directory for the series files (default ./runs)")
    _add_logging_flags(plot)
    return parser


def settings_from_args(args: argparse.Namespace) -> SettingsManager:
    overrides = {key: getattr(args, f"set_{key}", None) for key in DEFAULT_SETTINGS if key != "lazy"}
    if args.lazy:
        overrides["lazy"] = True
    if args.seed is not None:
        overrides["seeds"] = [args.seed]
    return SettingsManager(preset=args.preset, settings_path=args.config, overrides=overrides)


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "plot-data":
        results = [RunResult.load(path) for path in args.csv]
        emit_plots(results, args.kind, args.out_dir)
        return config.EXIT_OK

    experiment = settings_from_args(args).build_config()
    if args.command == "validate-config":
        sys.stdout.write(format_key_value(experiment.to_settings()))
    elif args.command == "run":
        run_experiment(experiment, args.out_dir)
    else:
        sweep = run_sweep(experiment, args.out_dir)
        if len(sweep.results) > 1:
            emit_plots(sweep.results, "ratio_vs_rounds", args.out_dir)
    return config.EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format='%(asctime)s - %(levelname)s - %(message)s')
    try:
        return _dispatch(args)
    except ConfigError as e:
        logging.error(f"Configuration error: {e}")
        return config.EXIT_CONFIG_ERROR
    except SimulatorError as e:
        logging.error(f"Run failed: {e}")
        return config.EXIT_RUNTIME_ERROR
    except Exception as e:
        logging.critical(f"Unexpected error: {e}", exc_info=True)
        return config.EXIT_RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
