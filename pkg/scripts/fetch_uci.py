#!/usr/bin/env python3
"""Download the two real benchmark tables and rewrite them as CSV.

The acceptance suite's yacht and airfoil benchmarks read ``data/yacht.csv``
and ``data/airfoil.csv`` (last column = label).  Those files are not checked
in; run this script once on a machine with network access:

    python3 scripts/fetch_uci.py          # writes both into data/
    python3 scripts/fetch_uci.py --only yacht --out-dir /tmp/d

Both sources are plain whitespace-separated numeric tables; this script only
re-delimits them and adds a header, it never edits values.
"""

from __future__ import annotations

import argparse
import csv
import sys
import urllib.error
import urllib.request
from pathlib import Path

SOURCES = {
    "yacht": {
        "url": (
            "https://archive.ics.uci.edu/ml/machine-learning-databases/"
            "00243/yacht_hydrodynamics.data"
        ),
        "columns": 7,  # 6 hull-geometry features + residuary resistance
    },
    "airfoil": {
        "url": (
            "https://archive.ics.uci.edu/ml/machine-learning-databases/"
            "00291/airfoil_self_noise.dat"
        ),
        "columns": 6,  # 5 aerodynamic features + scaled sound pressure
    },
}


def fetch_table(url: str, expected_columns: int) -> list[list[float]]:
    """Download a whitespace-delimited numeric table."""
    with urllib.request.urlopen(url, timeout=60) as response:
        text = response.read().decode("utf-8")
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        cells = line.split()
        if not cells:
            continue
        if len(cells) != expected_columns:
            raise ValueError(
                f"{url} line {lineno}: expected {expected_columns} fields, got {len(cells)}"
            )
        rows.append([float(c) for c in cells])
    if not rows:
        raise ValueError(f"{url}: empty table")
    return rows


def write_csv(rows: list[list[float]], path: Path) -> None:
    n_features = len(rows[0]) - 1
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j + 1}" for j in range(n_features)] + ["y"])
        for row in rows:
            writer.writerow([repr(v) for v in row])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--only", choices=sorted(SOURCES), default=None,
        help="fetch a single dataset instead of both",
    )
    parser.add_argument(
        "--out-dir", default=str(Path(__file__).resolve().parent.parent / "data"),
        help="directory for the CSV files (default: the repository's data/)",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = [args.only] if args.only else sorted(SOURCES)
    for name in names:
        source = SOURCES[name]
        target = out_dir / f"{name}.csv"
        try:
            rows = fetch_table(source["url"], source["columns"])
        except (urllib.error.URLError, OSError, ValueError) as exc:
            print(f"error: could not fetch {name}: {exc}", file=sys.stderr)
            return 1
        write_csv(rows, target)
        print(f"wrote {target}: {len(rows)} rows, {source['columns'] - 1} features + label")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
