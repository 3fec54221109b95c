"""Entry point: ``plot <kind> <input.csv> -o <out.png>``.

Exits 0 on success, 2 on any input problem (missing file, wrong schema,
header-only CSV).
"""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, PlotJob, SchemaError, render


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot", description="Render guidesim CSV outputs as images."
    )
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("input", help="input CSV file")
    parser.add_argument("-o", "--output", required=True, help="output image path")
    args = parser.parse_args(argv)
    try:
        render(PlotJob(input_path=args.input, output_path=args.output,
                       kind=args.kind))
    except (SchemaError, FileNotFoundError) as exc:
        print(f"plot: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
