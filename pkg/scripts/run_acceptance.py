"""Run the eleven acceptance checks and print one line per criterion.

    python scripts/run_acceptance.py [--json out.json]
"""
import argparse
import sys
from pathlib import Path

from qfl import acceptance
from qfl.cli import to_json


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--json", type=Path, help="also write the measured values here")
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()
    results = acceptance.run_all(acceptance.Context(seed=args.seed))
    for r in results:
        print(r.line())
    if args.json:
        args.json.write_text(to_json([{"id": r.cid, "title": r.title, "passed": r.passed,
                                       "values": r.values, "timing": r.timing}
                                      for r in results]) + "\n")
    return 0 if all(r.passed for r in results) else 1


if __name__ == "__main__":
    sys.exit(main())
