#!/usr/bin/env python3
"""Born-rule check at the command line: run the shipped scenario and print a table.

Usage: python scripts/born_experiment.py [--out DIR] [--workers N]
"""

import argparse
import json
import sys
from pathlib import Path

from collapsim.cli import main as cli_main


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/born-rule")
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    config = Path(__file__).resolve().parent.parent / "scenarios" / "born_rule.yaml"
    code = cli_main(["run", str(config), "--out", args.out,
                     "--workers", str(args.workers)])
    if code != 0:
        return code

    summary = json.loads((Path(args.out) / "summary.json").read_text())
    born = summary["born"]
    print("\noutcome  frequency  expected  3*SE")
    for k, (freq, exp, se) in enumerate(zip(born["frequencies"],
                                            born["expected_weights"],
                                            born["standard_errors"])):
        print(f"{k:7d}  {freq:9.4f}  {exp:8.4f}  {3 * se:.4f}")
    print(f"\nresolved fraction: {born['resolved_fraction']:.4f}")
    print(f"within 3 SE: {born['within_3se']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
