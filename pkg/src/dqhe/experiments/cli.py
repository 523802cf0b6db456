"""Command-line entry point ``dqhe``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from ..circuit_map import CircuitError
from ..integrate import IntegrationError
from .config import ConfigError, RunConfig, load_config
from .figures import KINDS, PRESETS, figure_sweep, run_preset
from .io import OutputError
from .sweeps import SweepError


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI run configuration")
    common.add_argument("--out", type=Path, help="output directory (overrides [output] dir)")
    common.add_argument("--threads", type=int, default=1, help="worker processes (default 1)")
    common.add_argument("--seed", type=_seed, help="disorder base seed (overrides [disorder] base_seed)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="dqhe", description="Dynamical Hall response of driven qubit chains.",
                                parents=[common])
    sub = p.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        sub.add_parser(kind, parents=[common], help=f"run a {kind} job from the config")
    pre = sub.add_parser("preset", parents=[common], help="regenerate a figure dataset")
    pre.add_argument("name", choices=sorted(PRESETS))
    pre.add_argument("--quick", action="store_true", help="coarse grids and few disorder samples")
    return p


def _resolve(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = cfg.replace(disorder=replace(cfg.disorder, base_seed=args.seed))
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("dqhe: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = _resolve(args)
        out = args.out if args.out is not None else Path(cfg.output.dir)
        if args.command == "preset":
            paths = run_preset(args.name, out, cfg, args.threads, args.quick)
        else:
            paths = figure_sweep(cfg, args.command, out, args.threads)
    except (ConfigError, CircuitError, SweepError, IntegrationError, OutputError) as exc:
        print(f"dqhe: {exc}", file=sys.stderr)
        return 1
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
