"""Command-line entry point for the figure pipeline.

Usage::

    mfplots --branch runs/disk/branch.csv --thermo runs/disk/thermo.csv --out figs/

Exit codes:

* ``0`` — every requested figure was written.
* ``2`` — bad invocation or bad input: no input flag given, a file is
  missing or empty, or its content violates the artifact schema.  No
  figures are written for the offending input.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from mfplots.figures import FORMATS, PlotJob, render_job
from mfplots.schema import SchemaError

#: Exit code for invocation- or schema-level failures.
EXIT_BAD_INPUT = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfplots",
        description=(
            "Render the standard diagrams of a traced solution branch from "
            "mfbranch CSV artifacts: the branch in the (multiplier, mean "
            "stream function) plane, the multiplier as a function of energy, "
            "and the entropy curve."
        ),
    )
    parser.add_argument(
        "--branch",
        type=Path,
        metavar="CSV",
        help="branch artifact; renders branch.<format>",
    )
    parser.add_argument(
        "--thermo",
        type=Path,
        metavar="CSV",
        help="energy-parametrized artifact; renders lambda_of_E.<format> and entropy.<format>",
    )
    parser.add_argument(
        "--out",
        type=Path,
        required=True,
        metavar="DIR",
        help="output directory (created if absent)",
    )
    parser.add_argument(
        "--format",
        choices=FORMATS,
        default="svg",
        help="vector output format (default: svg)",
    )
    parser.add_argument(
        "--no-markers",
        action="store_true",
        help="suppress landmark markers (folds, flexes, E*, inflection)",
    )
    parser.add_argument(
        "--no-guide",
        action="store_true",
        help="suppress the 8*pi threshold guide line",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.branch is None and args.thermo is None:
        print("error: nothing to plot: pass --branch and/or --thermo", file=sys.stderr)
        return EXIT_BAD_INPUT
    job = PlotJob(
        branch_csv=args.branch,
        thermo_csv=args.thermo,
        out_dir=args.out,
        image_format=args.format,
        landmark_markers=not args.no_markers,
        guide_8pi=not args.no_guide,
    )
    try:
        written = render_job(job)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    for path in written:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
