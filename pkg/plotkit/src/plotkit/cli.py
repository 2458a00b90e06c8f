"""Command-line entry: one figure per invocation, from flags or a JSON file."""

import argparse
import json
import sys

from .figures import FIGURE_KINDS, FigureRequest, render
from .schemas import SchemaError


def request_from_args(args) -> FigureRequest:
    if args.config:
        with open(args.config) as fh:
            cfg = json.load(fh)
        return FigureRequest(
            kind=cfg["kind"], inputs=list(cfg["inputs"]), output=cfg["output"],
            log_x=cfg.get("log_x", True), log_y=cfg.get("log_y", True),
            title=cfg.get("title"), color_by_final=cfg.get("color_by_final", False))
    if not (args.kind and args.input and args.out):
        raise SchemaError("either --config or all of --kind/--input/--out "
                          "must be given")
    return FigureRequest(kind=args.kind, inputs=args.input, output=args.out,
                         log_x=not args.linear_x, log_y=not args.linear_y,
                         title=args.title, color_by_final=args.color_by_final)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plotkit",
        description="Render training-lab figures from the documented CSV tables.")
    parser.add_argument("--config", help="JSON figure request")
    parser.add_argument("--kind", choices=FIGURE_KINDS)
    parser.add_argument("--input", action="append",
                        help="input CSV (repeatable; order is documented per kind)")
    parser.add_argument("--out", help="output image path (.png or .svg)")
    parser.add_argument("--title")
    parser.add_argument("--linear-x", action="store_true")
    parser.add_argument("--linear-y", action="store_true")
    parser.add_argument("--color-by-final", action="store_true",
                        help="color ratio lines by the final qPINN MSE "
                             "(second input: mse_ratios.csv)")
    args = parser.parse_args(argv)
    try:
        path = render(request_from_args(args))
    except SchemaError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
