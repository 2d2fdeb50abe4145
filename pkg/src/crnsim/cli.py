"""
Command line entry point.

    crnsim run --config scenario.cfg --seed 3 --out trace.csv
    crnsim run --preset paper-fig4-small --controller baseline --format jsonl
    crnsim validate --config scenario.cfg

Exit codes: 0 success, 2 configuration error, 3 I/O error. The seed comes
from ``--seed``, else ``CRN_SIM_SEED``, else the config.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import CONTROLLERS, PRESETS, ConfigError, load_config, preset
from .harness import emit_metrics, run_scenario, write_metrics

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
SEED_ENV = "CRN_SIM_SEED"


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="crnsim", description=__doc__.split("\n\n")[0].strip())
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario and write its metrics trace")
    run.add_argument("--config", help="flat key = value scenario file")
    run.add_argument("--preset", choices=sorted(PRESETS),
                     help="starting defaults; keys in --config override them")
    run.add_argument("--seed", type=_nonneg_int)
    run.add_argument("--steps", type=_nonneg_int, help="override the horizon N")
    run.add_argument("--controller", choices=CONTROLLERS)
    run.add_argument("--out", help="output path (default: stdout)")
    run.add_argument("--format", choices=("csv", "jsonl"), default="csv")

    val = sub.add_parser("validate", help="check a scenario file and exit")
    val.add_argument("--config", required=True)
    val.add_argument("--preset", choices=sorted(PRESETS))
    return ap


def _load(args):
    if args.config is None:
        if args.preset is None:
            raise ConfigError("give --config or --preset")
        return preset(args.preset)
    return load_config(args.config, default_preset=args.preset)


def _seed(args, env):
    if args.seed is not None:
        return args.seed
    text = env.get(SEED_ENV)
    if text is None:
        return None
    try:
        value = int(text)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} is not an integer: {text!r}", field="seed") from None
    if value < 0:
        raise ConfigError(f"{SEED_ENV} must be >= 0", field="seed")
    return value


def cmd_run(args, env) -> int:
    cfg = _load(args)
    changes = {}
    seed = _seed(args, env)
    if seed is not None:
        changes["seed"] = seed
    if args.steps is not None:
        changes["horizon"] = args.steps
    if args.controller is not None:
        changes["controller"] = args.controller
    if changes:
        cfg = cfg.replace(**changes)
    trace = run_scenario(cfg)
    if args.out is None:
        write_metrics(trace, sys.stdout, args.format)
    else:
        emit_metrics(trace, args.out, args.format)
    return EXIT_OK


def cmd_validate(args, env) -> int:
    cfg = _load(args)
    print(f"ok: {cfg.count_pu} PU, {cfg.count_su} SU, N={cfg.horizon}, "
          f"controller={cfg.controller}, seed={cfg.seed}")
    return EXIT_OK


def main(argv=None, env=None) -> int:
    args = build_parser().parse_args(argv)
    env = os.environ if env is None else env
    handler = cmd_run if args.command == "run" else cmd_validate
    try:
        return handler(args, env)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
