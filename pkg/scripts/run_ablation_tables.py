#!/usr/bin/env python3
"""Run the tracker-weight ablation on both stress scenarios.

Each scenario is simulated once per seed; every weight row replays the same
recorded sensor stream, so rows differ only in how candidates are scored.
Prints one aligned table per scenario; --out also writes the raw numbers.
"""

import argparse
import json

from quadtrack import scenarios
from quadtrack.ablation import DEFAULT_GRID, run_ablation

SCENARIOS = ("occlusion_decoy", "false_positive_storm")


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--parallel", action="store_true")
    ap.add_argument("--out", default=None, help="JSON result file")
    args = ap.parse_args()

    results = {}
    for name in SCENARIOS:
        result = run_ablation(scenarios.get(name), grid=DEFAULT_GRID,
                              n_seeds=args.seeds, parallel=args.parallel)
        print(result.table())
        results[name] = result.as_dict()
    if args.out:
        with open(args.out, "w") as fp:
            json.dump(results, fp, indent=2)
            fp.write("\n")
        print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
