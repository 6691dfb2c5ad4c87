"""Standalone figure renderer: `gomimo-render --kind ber --in ber_sweep.csv
--out fig.png`."""

import argparse
import sys

from .render import KINDS, FigureSpec, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gomimo-render",
        description="Render figures from gomimo experiment CSVs")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--in", dest="inputs", required=True, action="append",
                        help="input CSV (repeatable)")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--title", default="")
    parser.add_argument("--xlabel", default="")
    parser.add_argument("--ylabel", default="")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = FigureSpec(inputs=tuple(args.inputs), kind=args.kind,
                          output=args.out, title=args.title,
                          xlabel=args.xlabel, ylabel=args.ylabel)
        path = render(spec)
    except SchemaError as ex:
        print(f"schema error: {ex}", file=sys.stderr)
        return 2
    except OSError as ex:
        print(f"io error: {ex}", file=sys.stderr)
        return 3
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
