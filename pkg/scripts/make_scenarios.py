#!/usr/bin/env python3
"""Write every bundled scenario to scenarios/<name>.json.

The generated files are the on-disk form of the builders in
quadtrack.scenarios; regenerate after editing a builder so the committed
corpus stays in sync (save -> load round trips byte-identically).
"""

import argparse
import os

from quadtrack import scenarios
from quadtrack.config import save_scenario


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="scenarios")
    args = ap.parse_args()

    os.makedirs(args.out_dir, exist_ok=True)
    for name in scenarios.names():
        path = os.path.join(args.out_dir, f"{name}.json")
        save_scenario(scenarios.get(name), path)
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
