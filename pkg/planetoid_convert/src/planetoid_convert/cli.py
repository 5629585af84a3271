"""planetoid-convert --raw <dir> --name {cora|citeseer|pubmed} --out <dir>"""

from __future__ import annotations

import argparse
import logging
import sys

from .convert import KNOWN_NAMES, ConversionError, convert


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="planetoid-convert",
        description="Convert raw Planetoid citation files to a dataset directory",
    )
    parser.add_argument("--raw", required=True, help="directory with ind.NAME.* files")
    parser.add_argument("--name", required=True, choices=KNOWN_NAMES)
    parser.add_argument("--out", required=True, help="output dataset directory")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        convert(args.raw, args.name, args.out)
    except ConversionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
