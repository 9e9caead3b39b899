"""Command-line entry point: ``superrad <command> [--config FILE] [--out DIR] ...``."""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig, config_to_dict, load_config, validate
from .experiment import (
    overlap_between,
    robustness_sweep,
    run_angular,
    run_evolve,
    run_experiment,
    run_rates,
)
from .export import write_json
from .field import build_angular_grid
from .geometry import read_sample, write_sample


def _grid(text: str):
    m = re.fullmatch(r"(\d+)x(\d+)", text)
    if not m:
        raise argparse.ArgumentTypeError(f"expected <n_polar>x<n_azimuth>, got {text!r}")
    return int(m.group(1)), int(m.group(2))


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML/JSON experiment config (defaults: 7x7x20 Rb lattice)")
    common.add_argument("--out", help="output directory (overrides output_dir)")
    common.add_argument("--grid", type=_grid, help="angular grid override, e.g. 64x64")
    common.add_argument("--seed", type=_u64, help="seed override for perturbation and sweep")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="superrad", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("rates", parents=[common], help="collective decay rate of the symmetric state")
    sub.add_parser("evolve", parents=[common], help="population trace and per-atom snapshots")
    sub.add_parser("angular", parents=[common], help="emission profiles and cone fraction")
    ov = sub.add_parser("overlap", parents=[common], help="photon-mode overlap of two sample files")
    ov.add_argument("sample_a")
    ov.add_argument("sample_b")
    sub.add_parser("sweep", parents=[common], help="atom-removal robustness statistics")
    sub.add_parser("run", parents=[common], help="full pipeline with summary.json")
    sub.add_parser("sample", parents=[common], help="write the configured sample as a text table")
    sub.add_parser("show-config", parents=[common], help="print the effective configuration")
    return p


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else validate(ExperimentConfig())
    return cfg.with_overrides(output_dir=args.out, grid=args.grid, seed=args.seed)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = _config(args)
        if args.command == "rates":
            result = run_rates(cfg)
        elif args.command == "evolve":
            result = run_evolve(cfg)
        elif args.command == "angular":
            result = run_angular(cfg)
        elif args.command == "sweep":
            result = robustness_sweep(cfg)["summary"]
        elif args.command == "run":
            result = run_experiment(cfg)
        elif args.command == "sample":
            path = Path(cfg.output_dir) / "sample.txt"
            path.parent.mkdir(parents=True, exist_ok=True)
            write_sample(cfg.sample(), path)
            result = {"sample": str(path), "n_atoms": cfg.sample().n_atoms}
        elif args.command == "show-config":
            result = config_to_dict(cfg)
        else:  # overlap
            a, b = read_sample(args.sample_a), read_sample(args.sample_b)
            grid = build_angular_grid(axis=a.k0_direction, **cfg.grid_kwargs())
            fid = overlap_between(a, b, grid)
            result = {"sample_a": args.sample_a, "sample_b": args.sample_b, "fidelity": fid}
            write_json(Path(cfg.output_dir) / "overlap.json", result)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(result, indent=2, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
