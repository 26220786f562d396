"""
ACE experiment runner.

One subcommand per study plus a parameter sweep:

  nk     NK landscape analysis (census, optimum, hill climbs)
  ca     cellular automaton runs
  org    multi-unit firm search under a fixed coordination mode
  grow   growing firms learning their coordination mode
  ha     agentized hidden-action contracting
  sweep  one experiment per value of a config parameter

Exit codes: 0 success, 2 invalid configuration, 3 output could not be written.
"""
import argparse
import os
import sys

from colorama import Fore, Style, init as colorama_init
from dotenv import load_dotenv

from src.config import ConfigError, load
from src.harness import EXIT_CONFIG, EXIT_OK, parse_value, run_experiment, sweep
from src.utils.logger import ActionType, log_experiment

# Load environment variables FIRST
load_dotenv()

OUTPUT_DIR_ENV = "ACE_OUTPUT_DIR"

SUBCOMMANDS = {
    "nk": "nk-analysis",
    "ca": "automaton",
    "org": "org-search",
    "grow": "growth-study",
    "ha": "hidden-action",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Run agent-based computational economics experiments")
    commands = parser.add_subparsers(dest="command", required=True)

    def common(sub):
        sub.add_argument("--config", type=str, required=True, help="YAML experiment configuration")
        sub.add_argument("--seed", type=int, default=None, help="Master seed (unsigned 64-bit)")
        sub.add_argument("--replications", type=int, default=None, help="Number of replications")
        sub.add_argument("--out", type=str, default=None, help="Output directory")
        sub.add_argument("--quiet", action="store_true", help="Suppress console output")

    for name, study in SUBCOMMANDS.items():
        common(commands.add_parser(name, help=f"Run a {study} experiment"))

    sweep_parser = commands.add_parser("sweep", help="Run one experiment per value of a parameter")
    common(sweep_parser)
    sweep_parser.add_argument("--axis", type=str, required=True, help="Dotted parameter path, e.g. landscape.k")
    sweep_parser.add_argument("--values", type=str, nargs="+", required=True, help="Values to sweep")
    return parser


def load_config(args):
    config = load(args.config)
    expected = SUBCOMMANDS.get(args.command)
    if expected is not None and config.study != expected:
        raise ConfigError(
            f"'{args.command}' runs {expected} experiments but the config describes '{config.study}'",
            field="study",
            line=config.lines.get("study"),
        )
    out = args.out or os.getenv(OUTPUT_DIR_ENV) or None
    return config.with_overrides(seed=args.seed, replications=args.replications, output_dir=out)


def banner(config, command: str) -> None:
    print(f"\n{'='*60}")
    print(f"🚀 {Style.BRIGHT}{config.study.upper()}{Style.RESET_ALL} ({command})")
    print(f"{'='*60}")
    print(f"   Replications : {config.replications}")
    print(f"   Seed         : {config.seed}")
    print(f"   Output       : {config.output_dir}")
    print(f"   Config hash  : {config.config_hash()[:12]}")
    print(f"{'='*60}")


def main(argv=None) -> int:
    colorama_init()
    args = build_parser().parse_args(argv)

    try:
        config = load_config(args)
    except ConfigError as e:
        if not args.quiet:
            print(f"{Fore.RED}❌ Invalid configuration: {e}{Style.RESET_ALL}")
        log_experiment("CLI", args.command, ActionType.CONFIG,
                       {"parameters": {"config": args.config}, "outcome": str(e)}, "FAILURE")
        return EXIT_CONFIG

    if not args.quiet:
        banner(config, args.command)

    if args.command == "sweep":
        try:
            result = sweep(config, args.axis, [parse_value(v) for v in args.values], quiet=args.quiet)
        except ConfigError as e:
            if not args.quiet:
                print(f"{Fore.RED}❌ Invalid sweep: {e}{Style.RESET_ALL}")
            return EXIT_CONFIG
        if not args.quiet and result.combined is not None:
            print(f"\n📊 Combined results\n{result.combined.to_string(index=False)}")
        return result.exit_code

    result = run_experiment(config, quiet=args.quiet)
    if not args.quiet and result.summary is not None:
        print(f"\n📊 Batch summary\n{result.summary.batch.to_string(index=False)}")
    if not args.quiet:
        print(f"\n{'✅ EXPERIMENT COMPLETE' if result.exit_code == EXIT_OK else '⚠️  EXPERIMENT FAILED'}")
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
