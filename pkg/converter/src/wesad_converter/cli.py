"""Command-line wrapper: wesad-convert <archive-or-root> <out-dir>."""

from __future__ import annotations

import argparse
import json
import sys

from .convert import ConvertError, convert_all


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="wesad-convert", description=__doc__)
    parser.add_argument("source", help="one subject .pkl or the dataset root directory")
    parser.add_argument("out", help="output directory for the neutral layout")
    args = parser.parse_args(argv)
    try:
        converted = convert_all(args.source, args.out)
    except ConvertError as exc:
        print(json.dumps({"error": "convert", "message": str(exc)}), file=sys.stderr)
        return 2
    for d in converted:
        print(d)
    print(f"converted {len(converted)} subjects -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
