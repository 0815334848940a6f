"""Command line interface.

Subcommands: evolve, sweep-tf, map-dt, disorder, field-dump. Each accepts
--config (JSON run configuration; defaults apply when omitted), --out
(output directory, overriding the config), --workers (process pool width),
and --seed (override of the disorder master seed). Exit code 0 on success,
1 with a diagnostic on stderr for any error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .experiments import (
    ConfigError,
    RunConfig,
    load_config,
    run_disorder_ensemble,
    run_dt_map,
    run_evolution,
    run_field_dump,
    run_tf_sweep,
)

_COMMANDS = {
    "evolve": (run_evolution, "propagate one protocol; heatmap + fidelity series"),
    "sweep-tf": (run_tf_sweep, "fidelity of both protocols across the duration grid"),
    "map-dt": (run_dt_map, "fidelity over (duration, distance); extract the limiting velocity"),
    "disorder": (run_disorder_ensemble, "fidelity statistics over disordered couplings"),
    "field-dump": (run_field_dump, "sample the applied diagonal field for inspection"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="magnon-transport",
        description="Spin-chain excitation transport: simulation and control experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in _COMMANDS.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument(
            "--config",
            type=Path,
            default=None,
            help="JSON run configuration; built-in defaults apply when omitted",
        )
        sp.add_argument(
            "--out", type=Path, default=None, help="output directory (overrides output_dir)"
        )
        sp.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")
        sp.add_argument(
            "--seed", type=int, default=None, help="override the disorder master seed"
        )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config) if args.config is not None else RunConfig()
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be a non-negative integer")
            config = replace(config, disorder=replace(config.disorder, master_seed=args.seed))
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        out_dir = args.out if args.out is not None else Path(config.output_dir)
        runner, _ = _COMMANDS[args.command]
        summary = runner(config, out_dir, args.workers)
        for line in summary.get("lines", []):
            print(line)
        print(f"outputs in {out_dir}")
        return 0
    except Exception as exc:  # CLI contract: nonzero exit plus a diagnostic
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
