import argparse
import logging
import sys

from mimo_ce import MimoCeError
from mimo_ce.config import PROFILES, apply_settings
from mimo_ce.reader.read_config import read_config
from mimo_ce.run_experiment import (
    PRESETS,
    check_report,
    emit_csv,
    finish_report,
    parse_preset,
    run_experiment,
    trace_dlmmse,
)

logger = logging.getLogger("mimo_ce")

parser = argparse.ArgumentParser(
    prog="mimo_ce",
    description="Run channel estimation experiments and store MSE tables.",
)
subparsers = parser.add_subparsers(dest="command", required=True)

experiment = subparsers.add_parser("experiment", help="run one experiment preset")
experiment.add_argument(
    "preset",
    help=f"preset number or name, one of {', '.join(f'preset{p}' for p in PRESETS)}",
)
experiment.add_argument(
    "--config", type=str, help="key = value configuration file applied over the profile"
)
experiment.add_argument(
    "--out",
    type=str,
    default="results.csv",
    help="csv path of the primary table (default: results.csv)",
)
experiment.add_argument("--seed", type=int, help="master seed, overrides the config")
experiment.add_argument(
    "--profile",
    type=str,
    choices=sorted(PROFILES),
    default="desk",
    help="base parameter set (default: desk)",
)
experiment.add_argument(
    "--trials", type=int, help="number of Monte Carlo trials, overrides the config"
)
experiment.add_argument(
    "--workers", type=int, help="number of trial worker threads, overrides the config"
)
experiment.add_argument(
    "--check",
    action="store_true",
    help="evaluate acceptance checks and exit nonzero on any violation",
)
experiment.add_argument(
    "--trace",
    type=str,
    help="also write per-antenna errors of one distributed run to this csv",
)
verbosity = experiment.add_mutually_exclusive_group()
verbosity.add_argument("--verbose", action="store_true", help="log debug messages")
verbosity.add_argument("--quiet", action="store_true", help="log warnings only")


def build_config(args):
    """Profile, then configuration file, then command line overrides."""
    config = PROFILES[args.profile]
    if args.config:
        config = read_config(args.config, config)
    overrides = {
        key: value
        for key, value in (
            ("seed", args.seed),
            ("mc.trials", args.trials),
            ("mc.workers", args.workers),
        )
        if value is not None
    }
    return apply_settings(config, overrides)


def main(argv=None):
    args = parser.parse_args(argv)
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(
        level=level, format="%(asctime)s %(name)s %(levelname)s: %(message)s"
    )

    try:
        preset = parse_preset(args.preset)
        config = build_config(args)
    except (MimoCeError, FileNotFoundError) as err:
        logger.error("%s", err)
        return 2

    kwargs = {
        "profile": args.profile,
        "config": args.config,
        "seed": config.seed,
        "trials": config.trials,
        "workers": config.workers,
        "check": args.check,
        "trace": args.trace,
    }
    str_args = f"\tpreset : {preset}\n\tout : {args.out}\n"
    for k, v in kwargs.items():
        str_args += f"\t{k} : {v}\n"
    print(f"Running experiment with following arguments:\n{str_args}")

    try:
        report = run_experiment(preset, config)
        emit_csv(report, args.out)
        if args.trace:
            trace_dlmmse(config, args.trace)
        failed = check_report(report, config) if args.check else []
    except MimoCeError as err:
        logger.error("%s", err)
        return 2

    finish_report(report, failed)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
