"""Command-line entry point: ``scfde run | list-presets | emit``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, load_config, preset_names
from .plotdata import figure_ids, write_plotdata
from .runner import run_scenario

log = logging.getLogger("scfde")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="scfde", description="SC-FDE link simulations with nonlinear post-distortion.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file or preset")
    run.add_argument("config", help="path to a .toml scenario or a preset name")
    run.add_argument("--seed", type=int, help="override the master seed")
    run.add_argument("--trials", type=int, help="override the number of blocks per sweep point")
    run.add_argument("--out-dir", default="runs", help="parent directory of the run directory (default: runs)")
    run.add_argument("--variant-filter", help="comma-separated glob patterns selecting receiver variants")

    sub.add_parser("list-presets", help="list the bundled scenarios")

    emit = sub.add_parser("emit", help="write plot data for one figure from a finished run")
    emit.add_argument("run_dir")
    emit.add_argument("figure_id", choices=figure_ids())
    emit.add_argument("--out-dir", help="destination directory (default: the run directory)")
    p.add_argument("-q", "--quiet", action="store_true", help="suppress progress messages")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        if args.command == "list-presets":
            for name in preset_names():
                cfg = load_config(name)
                print(f"{name:18s} {cfg.scenario.description}")
                if cfg.scenario.kind == "link":
                    print(f"{'':18s} variants: {', '.join(cfg.receiver.variants)}")
            return 0
        if args.command == "run":
            cfg = load_config(args.config)
            if args.trials is not None and args.trials < 1:
                raise ConfigError("--trials must be positive")
            cfg = cfg.with_overrides(args.seed, args.trials, args.variant_filter)
            res = run_scenario(cfg, args.out_dir, log=log.info)
            print(res.run_dir)
            return 0
        path = write_plotdata(args.run_dir, args.figure_id, args.out_dir)
        print(path)
        return 0
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"scfde: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
