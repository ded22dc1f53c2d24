"""Run every acceptance check and print one pass/fail line per criterion.

usage: python3 scripts/run_acceptance.py [--json report.json]
"""

import argparse
import json
import sys

from oe2d.verify import run_suite


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--json")
    args = ap.parse_args()
    results = run_suite("all")
    for r in results:
        print(r.line())
    if args.json:
        with open(args.json, "w") as f:
            json.dump([r.to_dict() for r in results], f, indent=2)
    return 0 if all(r.passed for r in results) else 3


if __name__ == "__main__":
    sys.exit(main())
