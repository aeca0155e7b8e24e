"""Command line front end: plot --mode {cumulative|normalized} --in file:label ... --out img.png"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import MODES, PlotSpec, SchemaError, SeriesInput, render


def parse_input(text: str) -> SeriesInput:
    """``path:label``, or a bare path labeled by its stem."""
    if ":" in text:
        path, label = text.rsplit(":", 1)
        if path and label:
            return SeriesInput(Path(path), label)
    return SeriesInput(Path(text), Path(text).stem)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plot",
        description="Render simulator CSVs as regret figures.",
    )
    parser.add_argument("--mode", choices=MODES, required=True,
                        help="which column family to draw")
    parser.add_argument("--in", dest="inputs", action="append", required=True,
                        metavar="FILE[:LABEL]",
                        help="input CSV, repeatable; label defaults to the file stem")
    parser.add_argument("--out", default=None,
                        help="output image path; default <mode>.png beside the first input")
    parser.add_argument("--title", default=None, help="figure title")
    parser.add_argument("--xlabel", default="round")
    parser.add_argument("--ylabel", default=None)
    parser.add_argument("--dpi", type=int, default=120)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    # tolerate an explicit leading subcommand token so `regretfig plot ...`
    # and bare `plot ...` both work
    if argv and argv[0] == "plot":
        argv = argv[1:]
    args = build_parser().parse_args(argv)

    inputs = tuple(parse_input(t) for t in args.inputs)
    out = Path(args.out) if args.out else \
        inputs[0].path.parent / f"{args.mode}.png"
    try:
        spec = PlotSpec(inputs=inputs, output=out, mode=args.mode,
                        title=args.title, xlabel=args.xlabel,
                        ylabel=args.ylabel, dpi=args.dpi)
        written = render(spec)
    except (SchemaError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    print(written)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
