"""Command-line harness.

    quadtrack sim <scenario> [--out DIR] [--seed N] [--eq11-literal] [--no-gyro-comp]
    quadtrack track <events.jsonl> --prompt X,Y [--prompt-t T] [--weights a,b,c] [--out FILE]
    quadtrack ablate <scenario> [--grid table2|FILE] [--seeds N] [--parallel] [--out FILE]
    quadtrack metrics <run-dir> [--iou-threshold F] [--coast-credit N]
    quadtrack scenario ls | describe <name>

<scenario> is a JSON file path or a bundled name (a missing ".json" is
tried automatically, so `scenarios/occlusion_decoy` works).  Exit codes:
0 success, 1 configuration/usage error, 2 runtime abort.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from . import scenarios as bundled
from .ablation import DEFAULT_GRID, run_ablation
from .config import Scenario, load_scenario
from .errors import ConfigError, LogParseError, QuadtrackError, RuntimeAbort
from .logio import read_events, write_jsonl
from .metrics import MetricsParams, compute_metrics
from .replay import replay_track
from .simulator import run, write_run
from .tracker import TrackerConfig, TrackerWeights


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on usage errors; the harness contract
    reserves 2 for runtime aborts, so remap to 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def resolve_scenario(ref: str) -> Scenario:
    if os.path.isfile(ref):
        return load_scenario(ref)
    if os.path.isfile(ref + ".json"):
        return load_scenario(ref + ".json")
    name = os.path.basename(ref)
    if name.endswith(".json"):
        name = name[:-5]
    if name in bundled.BUILDERS:
        return bundled.get(name)
    raise ConfigError(f"no scenario file or bundled scenario named {ref!r}")


def _parse_floats(text: str, n: int, what: str) -> tuple:
    parts = text.split(",")
    if len(parts) != n:
        raise ConfigError(f"{what}: expected {n} comma-separated values")
    try:
        return tuple(float(p) for p in parts)
    except ValueError as e:
        raise ConfigError(f"{what}: {e}") from e


def _parse_grid(text: str) -> tuple:
    if text == "table2":
        return DEFAULT_GRID
    try:
        with open(text) as fp:
            rows = json.load(fp)
    except FileNotFoundError:
        raise ConfigError(f"grid file not found: {text}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"grid file {text}: invalid JSON ({e.msg})") from e
    if (not isinstance(rows, list) or not rows
            or not all(isinstance(r, list) and len(r) == 3 for r in rows)):
        raise ConfigError(f"grid file {text}: expected a JSON list of "
                          "[w_iou, w_ekf, w_map] rows")
    return tuple(tuple(float(w) for w in r) for r in rows)


def _apply_overrides(sc: Scenario, args) -> Scenario:
    if args.seed is not None:
        sc = sc.with_seed(args.seed)
    if getattr(args, "eq11_literal", False):
        sc = dataclasses.replace(
            sc, controller=dataclasses.replace(sc.controller,
                                               literal_equations=True))
    if getattr(args, "no_gyro_comp", False):
        sc = dataclasses.replace(
            sc, tracker=dataclasses.replace(sc.tracker,
                                            gyro_compensation=False))
    return sc


def cmd_sim(args) -> int:
    sc = _apply_overrides(resolve_scenario(args.scenario), args)
    art = run(sc)
    out = args.out or os.path.join("runs", f"{sc.name}-s{sc.seed}")
    write_run(art, out)
    print(f"wrote {out}")
    print(json.dumps(art.summary["metrics"]))
    return 0


def cmd_track(args) -> int:
    events = read_events(args.log)
    px, py = _parse_floats(args.prompt, 2, "--prompt")
    weights = TrackerWeights(*_parse_floats(args.weights, 3, "--weights"))
    cam_w, cam_h, vfov = _parse_floats(args.camera, 3, "--camera")
    from .geometry import CameraModel

    cfg = TrackerConfig(camera=CameraModel.from_vfov(int(cam_w), int(cam_h), vfov),
                        weights=weights,
                        acceptance_fraction=args.acceptance_fraction)
    trace = replay_track(events, (px, py), args.prompt_t, cfg)
    if args.out:
        write_jsonl(args.out, trace)
        print(f"wrote {args.out} ({len(trace)} frames)")
    else:
        tracked = sum(1 for r in trace if r["status"] == "tracking")
        print(f"frames={len(trace)} tracking={tracked} "
              f"coasting={len(trace) - tracked}")
    return 0


def cmd_ablate(args) -> int:
    sc = _apply_overrides(resolve_scenario(args.scenario), args)
    grid = _parse_grid(args.grid)
    result = run_ablation(sc, grid=grid, n_seeds=args.seeds,
                          parallel=args.parallel)
    print(result.table(), end="")
    if args.out:
        with open(args.out, "w") as fp:
            json.dump(result.as_dict(), fp, indent=2)
            fp.write("\n")
        print(f"wrote {args.out}")
    return 0


def cmd_metrics(args) -> int:
    from .logio import read_jsonl

    tracker_path = os.path.join(args.run_dir, "tracker.jsonl")
    truth_path = os.path.join(args.run_dir, "groundtruth.jsonl")
    for p in (tracker_path, truth_path):
        if not os.path.isfile(p):
            raise ConfigError(f"missing trace file: {p}")
    m = compute_metrics(read_jsonl(tracker_path), read_jsonl(truth_path),
                        MetricsParams(args.iou_threshold, args.coast_credit))
    print(json.dumps(m.as_dict()))
    return 0


def cmd_scenario(args) -> int:
    if args.action == "ls":
        for name in bundled.names():
            print(name)
        return 0
    if not args.name:
        raise ConfigError("scenario describe: missing scenario name")
    sc = bundled.get(args.name)
    print(json.dumps(sc.to_dict(), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="quadtrack", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("sim", help="run a scenario closed loop")
    ps.add_argument("scenario")
    ps.add_argument("--out", default=None, help="output directory")
    ps.add_argument("--seed", type=int, default=None)
    ps.add_argument("--eq11-literal", action="store_true",
                    help="literal setpoint/force equations (no sign/scale repair)")
    ps.add_argument("--no-gyro-comp", action="store_true",
                    help="disable gyro compensation in the tracker")
    ps.set_defaults(fn=cmd_sim)

    pt = sub.add_parser("track", help="replay the tracker over a recorded log")
    pt.add_argument("log")
    pt.add_argument("--prompt", required=True, help="X,Y init point")
    pt.add_argument("--prompt-t", type=float, default=0.0)
    pt.add_argument("--weights", default="3,3,4")
    pt.add_argument("--camera", default="960,544,1.047", help="W,H,VFOV")
    pt.add_argument("--acceptance-fraction", type=float, default=0.05)
    pt.add_argument("--out", default=None, help="trace output file")
    pt.set_defaults(fn=cmd_track)

    pa = sub.add_parser("ablate", help="tracker-weight ablation table")
    pa.add_argument("scenario")
    pa.add_argument("--grid", default="table2",
                    help="'table2' or a JSON file of weight rows")
    pa.add_argument("--seeds", type=int, default=5)
    pa.add_argument("--seed", type=int, default=None, help="base seed override")
    pa.add_argument("--parallel", action="store_true")
    pa.add_argument("--out", default=None, help="JSON result file")
    pa.set_defaults(fn=cmd_ablate)

    pm = sub.add_parser("metrics", help="recompute metrics for a run directory")
    pm.add_argument("run_dir")
    pm.add_argument("--iou-threshold", type=float, default=0.3)
    pm.add_argument("--coast-credit", type=int, default=60)
    pm.set_defaults(fn=cmd_metrics)

    pc = sub.add_parser("scenario", help="list or show bundled scenarios")
    pc.add_argument("action", choices=["ls", "describe"])
    pc.add_argument("name", nargs="?", default=None)
    pc.set_defaults(fn=cmd_scenario)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except SystemExit as e:
        return int(e.code or 0)
    except (ConfigError, LogParseError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except RuntimeAbort as e:
        print(f"abort: {e}", file=sys.stderr)
        return 2
    except QuadtrackError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
