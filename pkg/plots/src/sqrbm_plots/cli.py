"""Command-line entry point: sqrbm-plots {sweep,budget} RESULTS_DIR [--out PATH]."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import FigureSpec, render
from .results import PlotDataError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sqrbm-plots",
        description="Render figures from exported sqrbm results directories.")
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in ("sweep", "budget"):
        p = sub.add_parser(kind)
        p.add_argument("input", type=Path, help="results directory")
        p.add_argument("--out", type=Path, default=None,
                       help=f"output image (default figures/{kind}.png)")
        p.add_argument("--band-alpha", type=float, default=0.25,
                       help="shading opacity for the sweep bands")
        p.add_argument("--linear-x", action="store_true",
                       help="linear instead of log x-axis")
        p.add_argument("--linear-y", action="store_true",
                       help="linear instead of log y-axis")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = args.out if args.out is not None else Path("figures") / f"{args.kind}.png"
    try:
        spec = FigureSpec(input_dir=args.input, kind=args.kind, out_path=out,
                          band_alpha=args.band_alpha,
                          log_x=False if args.linear_x else None,
                          log_y=False if args.linear_y else None)
        path = render(spec)
    except PlotDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
