"""Command line front end: design / sweep / hist / trace."""

from __future__ import annotations

import argparse
import math
import sys

from . import harness
from .harness import expand_cells, parse_config


def _load_config(args) -> harness.ExperimentConfig:
    config = parse_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.out is not None:
        config.output_dir = args.out
    config.validate()
    return config


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="beamforge",
        description="Design hybrid training-beam sensing matrices and evaluate "
        "them through Monte-Carlo sparse channel estimation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("design", "design every (scheme, bits) cell and save factors + summary"),
        ("sweep", "run the NMSE / spectral-efficiency Monte-Carlo sweep"),
        ("hist", "accumulate coherence histograms of the designed dictionaries"),
        ("trace", "record the design objective trace of a single cell"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the output directory")

    args = parser.parse_args(argv)
    try:
        config = _load_config(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    from . import plots

    if args.command == "design":
        rows, path = harness.run_design(config)
        print(f"wrote {path} and {len(rows)} design file(s) in {config.output_dir}")
    elif args.command == "sweep":
        records, path = harness.run_sweep(config)
        print(f"wrote {path} ({len(records)} records)")
        for fig in plots.plot_sweep(records, config.output_dir):
            print(f"wrote {fig}")
    elif args.command == "hist":
        results, path = harness.run_histogram(config)
        print(f"wrote {path}")
        print(f"wrote {plots.plot_histogram(results, config.output_dir)}")
    elif args.command == "trace":
        trace, path = harness.run_convergence_trace(config)
        scheme, bits = expand_cells(config)[0]
        print(f"wrote {path} ({len(trace)} iterations)")
        print(f"wrote {plots.plot_trace(trace, scheme, bits, config.output_dir)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
