"""Command-line front end: run scenarios, validate configs, list presets."""

import argparse
import os
import sys
from pathlib import Path

from .errors import CollapsimError, ConfigurationError
from .physics import preset_table
from .runner import EXIT_CONFIG, EXIT_NUMERICAL, run_scenario
from .scenario import parse_config

OUT_DIR_ENV = "COLLAPSIM_OUT_DIR"


def _load_config(path: str):
    p = Path(path)
    if not p.exists():
        raise ConfigurationError(f"configuration file not found: {path}")
    return parse_config(p.read_text(), name=p.stem)


def _resolve_out_dir(cfg, flag_value):
    if flag_value:
        return Path(flag_value)
    if cfg.output_directory:
        return Path(cfg.output_directory)
    root = os.environ.get(OUT_DIR_ENV)
    if root:
        return Path(root) / cfg.name
    return Path("runs") / cfg.name


def _cmd_run(args) -> int:
    try:
        cfg = _load_config(args.config)
    except ConfigurationError as exc:
        print(f"configuration error:\n{exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = _resolve_out_dir(cfg, args.out)
    try:
        code, paths = run_scenario(cfg, out_dir, workers=args.workers,
                                   seed_override=args.seed)
    except ConfigurationError as exc:
        print(f"configuration error:\n{exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CollapsimError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for name, path in sorted(paths.items()):
        print(f"wrote {path}")
    if code != 0:
        print("one or more invariant checks FAILED; see summary.json", file=sys.stderr)
    return code


def _cmd_validate(args) -> int:
    try:
        cfg = _load_config(args.config)
    except ConfigurationError as exc:
        print(f"configuration error:\n{exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"configuration OK: scenario {cfg.name!r} ({cfg.model}, "
          f"{cfg.ensemble.trajectories} trajectories)")
    return 0


def _cmd_presets(_args) -> int:
    print(preset_table())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="collapsim",
        description="Simulate spontaneous wave-function collapse dynamics on lattices.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario and write result artifacts")
    run_p.add_argument("config", help="path to a YAML scenario configuration")
    run_p.add_argument("--workers", type=int, default=1,
                       help="number of worker processes (results are worker-count independent)")
    run_p.add_argument("--out", default=None,
                       help=f"output directory (default: config, then ${OUT_DIR_ENV}, then ./runs/<name>)")
    run_p.add_argument("--seed", type=int, default=None,
                       help="override the master seed from the configuration")
    run_p.set_defaults(func=_cmd_run)

    val_p = sub.add_parser("validate", help="check a scenario configuration without running it")
    val_p.add_argument("config", help="path to a YAML scenario configuration")
    val_p.set_defaults(func=_cmd_validate)

    pre_p = sub.add_parser("presets", help="list named parameter presets")
    pre_p.set_defaults(func=_cmd_presets)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
