"""Command line entry point: ``hhcircuit <subcommand> [--config FILE] [--out DIR]``.

Exit codes: 0 success, 2 invalid configuration, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, DomainError
from .experiments import DEFAULTS, OUT_ENV, ExperimentConfig, format_table, run_experiment

HELP = {
    "det-scan": "fraction of random starts attracted by the orbit, per signal a",
    "neuron": "single stochastic neuron: spikes, trajectory, regularity statistics",
    "quiet-sweep": "percent of quiet runs per tau",
    "regular-sweep": "percent of regularly spiking runs per (sigma, tau)",
    "calibrate": "Monte Carlo critical values of the quiet test",
    "circuit": "ring circuit run with raster plot and rotation check",
    "reference": "deterministic reference ring and its autocorrelation",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hhcircuit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in DEFAULTS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", help="JSON config; missing fields take defaults")
        p.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or ./hhcircuit-out)")
        p.add_argument("--seed", type=int, help="master seed, overrides the config")
        p.add_argument("--jobs", type=int, help="parallel worker processes, overrides the config")
    return parser


def load_config(args) -> ExperimentConfig:
    if args.config:
        with open(args.config) as fh:
            cfg = ExperimentConfig.from_json(fh.read())
        if cfg.kind != args.command:
            raise ConfigError(f"config kind {cfg.kind!r} does not match subcommand {args.command!r}")
    else:
        cfg = ExperimentConfig.from_dict({"kind": args.command})
    if args.seed is not None:
        cfg.seed = args.seed
    if args.jobs is not None:
        cfg.jobs = args.jobs
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except (ConfigError, DomainError) as e:
        problems = getattr(e, "problems", [str(e)])
        print("invalid configuration:", file=sys.stderr)
        for msg in problems:
            print(f"  - {msg}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"cannot read config: {e}", file=sys.stderr)
        return 2
    try:
        result = run_experiment(cfg, args.out)
    except (ConfigError, DomainError) as e:
        print(f"invalid configuration: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001
        print(f"run failed: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    print(format_table(result.summary))
    print(f"results written to {result.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
