"""Approximate mean-variance frontier of a configured book.

Runs the ``frontier`` subcommand on a config (the desk book by default) and
prints the table, marking the minimum-variance vertex.

    python3 scripts/frontier_desk.py configs/desk_book.json
"""

import argparse
import contextlib
import csv
import io
import sys
from pathlib import Path

from dgmv.cli import run

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config", nargs="?", default=str(ROOT / "configs" / "desk_book.json"))
    args = ap.parse_args()

    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = run(["frontier", "--config", args.config, "--format", "csv"])
    if code:
        sys.exit(code)
    rows = list(csv.DictReader(io.StringIO(buf.getvalue())))
    ok = [r for r in rows if r["variance"]]
    vertex = min(ok, key=lambda r: float(r["variance"]))
    print(f"{'mean':>14} {'std dev':>12}")
    for r in rows:
        if not r["variance"]:
            print(f"{float(r['target']):14.6g} {'failed':>12}")
            continue
        mark = "  <- minimum variance" if r is vertex else ""
        print(f"{float(r['mean']):14.6g} {float(r['variance']) ** 0.5:12.6g}{mark}")


if __name__ == "__main__":
    main()
