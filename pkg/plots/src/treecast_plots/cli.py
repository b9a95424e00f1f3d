"""Command line entry point: treecast-plots render --spec <file>."""

import argparse
import sys

from .figures import SchemaError, render, spec_from_file


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="treecast-plots",
        description="draw figures from experiment result CSVs")
    sub = parser.add_subparsers(dest="command", required=True)
    p_render = sub.add_parser("render", help="render one figure spec")
    p_render.add_argument("--spec", required=True,
                          help="JSON file: kind, csv, out, and options")
    args = parser.parse_args(argv)

    try:
        spec = spec_from_file(args.spec)
        out = render(spec)
    except (SchemaError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
