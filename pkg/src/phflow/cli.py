"""Command line entry point: ``phflow <experiment> [--config F] [--out D] [--seed N] [--set k=v ...]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .experiments import resolve_config, run_experiment
from .ode import IntegrationError

log = logging.getLogger("phflow")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_IO = 4

COMMANDS = {
    "linear-single": "linear_single",
    "beta-sweep": "beta_sweep",
    "linear-seq": "linear_sequential",
    "duffing": "duffing_batch",
    "gd-compare": "gd_compare",
}


class ConfigError(Exception):
    pass


def _parse_override(text: str):
    if "=" not in text:
        raise ConfigError(f"--set expects key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phflow", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON config file or a previous run's manifest.json")
        p.add_argument("--out", type=Path, default=None, help="output directory (default: runs/<command>)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config entry by dotted key; VALUE is parsed as JSON when possible")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    experiment = COMMANDS[args.command]
    out = args.out or Path("runs") / args.command
    try:
        file_cfg = {}
        if args.config is not None:
            try:
                file_cfg = json.loads(args.config.read_text())
            except json.JSONDecodeError as err:
                raise ConfigError(f"{args.config}: {err}") from err
        overrides = dict(_parse_override(s) for s in args.overrides)
        cfg = resolve_config(experiment, file_cfg, overrides, args.seed)
    except (ConfigError, KeyError, ValueError, TypeError) as err:
        print(f"phflow: config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as err:
        print(f"phflow: cannot read config: {err}", file=sys.stderr)
        return EXIT_IO

    log.info("running %s into %s", experiment, out)
    try:
        summary = run_experiment(experiment, cfg, out)
    except IntegrationError as err:
        print(f"phflow: numerical divergence: {err}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except OSError as err:
        print(f"phflow: I/O error: {err}", file=sys.stderr)
        return EXIT_IO
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
