#!/usr/bin/env python3
"""Run the 84-agent scale study end to end (a few minutes of wall clock).

Usage: python scripts/run_example2.py [--seed 0] [--out out/example2]
"""

import argparse
import json
from pathlib import Path

from resilnet.reports import run_scenario
from resilnet.scenarios import config_to_dict, generate_example2


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="out/example2")
    args = parser.parse_args()

    config = generate_example2(args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "scenario.json", "w") as fh:
        json.dump(config_to_dict(config), fh, indent=2)
        fh.write("\n")
    report = run_scenario(config, out)
    print(json.dumps(report, indent=2, sort_keys=True, default=float))


if __name__ == "__main__":
    main()
