#!/usr/bin/env python3
"""Regenerate the bundled scenario JSON files under catalogs/."""

from __future__ import annotations

import argparse
from pathlib import Path

from contextua.catalogs import write_bundled


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--dest",
        default=Path(__file__).resolve().parents[1] / "catalogs",
        type=Path,
    )
    args = parser.parse_args()
    for path in write_bundled(args.dest):
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
