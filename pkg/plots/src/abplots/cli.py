"""Command-line chart renderer for experiment CSV exports."""

from __future__ import annotations

import argparse
import sys

from .render import PanelSpec, SchemaError, render_summary, render_violin


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="abplots", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    render = sub.add_parser("render", help="render a violin panel or a bias summary chart")
    source = render.add_mutually_exclusive_group(required=True)
    source.add_argument("--panel", help="raw export CSV (one violin per design)")
    source.add_argument("--summary", help="summary export CSV (bias bars with CI whiskers)")
    render.add_argument("--gte", type=float, help="true-GTE reference value (panel mode)")
    render.add_argument("--out", required=True, help="output image path")
    render.add_argument("--format", choices=("svg", "png"), default="svg")
    render.add_argument("--estimator", default="ipw",
                        help="estimator column to plot (default ipw)")
    render.add_argument("--title")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.panel:
            if args.gte is None:
                print("error: --gte is required with --panel", file=sys.stderr)
                return 2
            path = render_violin(PanelSpec(
                csv_path=args.panel,
                true_gte=args.gte,
                out_path=args.out,
                title=args.title,
                estimator=args.estimator,
                fmt=args.format,
            ))
        else:
            path = render_summary(args.summary, args.out, estimator=args.estimator,
                                  title=args.title, fmt=args.format)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
