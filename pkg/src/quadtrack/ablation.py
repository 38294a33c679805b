"""Tracker-weight ablation: one recorded stream per seed, many replays.

For each seed the scenario is simulated once and the sensor stream is kept;
every weight row then replays that identical stream, so rows differ only in
how the tracker scores candidates.  The optional parallel path farms seeds
out to worker processes and returns results in seed order, bit-identical to
the sequential path.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .config import Scenario
from .metrics import Metrics, compute_metrics
from .replay import replay_track
from .simulator import run
from .tracker import TrackerConfig, TrackerWeights

DEFAULT_GRID = ((3.0, 0.0, 0.0), (3.0, 3.0, 0.0), (3.0, 0.0, 4.0),
                (3.0, 3.0, 4.0))


@dataclass(frozen=True)
class AblationRow:
    weights: tuple
    per_seed: tuple          # Metrics, one per seed

    def mean(self, field: str) -> float:
        vals = [getattr(m, field) for m in self.per_seed]
        return sum(vals) / len(vals)

    @property
    def lock_lost(self) -> float | None:
        vals = [m.lock_lost_at for m in self.per_seed if m.lock_lost_at is not None]
        return sum(vals) / len(vals) if vals else None


@dataclass(frozen=True)
class AblationResult:
    scenario_name: str
    seeds: tuple
    rows: tuple              # AblationRow, grid order

    def as_dict(self) -> dict:
        return {
            "scenario": self.scenario_name,
            "seeds": list(self.seeds),
            "rows": [{
                "weights": list(r.weights),
                "mean": {
                    "iou_pct": r.mean("iou_pct"),
                    "overlap_pct": r.mean("overlap_pct"),
                    "tracked_pct": r.mean("tracked_pct"),
                    "lock_lost_at": r.lock_lost,
                },
                "per_seed": [m.as_dict() for m in r.per_seed],
            } for r in self.rows],
        }

    def table(self) -> str:
        head = (f"scenario: {self.scenario_name}   seeds: {len(self.seeds)}\n"
                f"{'w_iou':>6} {'w_ekf':>6} {'w_map':>6} "
                f"{'iou%':>8} {'overlap%':>9} {'tracked%':>9} {'lock_lost':>10}")
        lines = [head]
        for r in self.rows:
            ll = "-" if r.lock_lost is None else f"{r.lock_lost:.2f}"
            lines.append(
                f"{r.weights[0]:>6.0f} {r.weights[1]:>6.0f} {r.weights[2]:>6.0f} "
                f"{r.mean('iou_pct'):>8.1f} {r.mean('overlap_pct'):>9.1f} "
                f"{r.mean('tracked_pct'):>9.1f} {ll:>10}")
        return "\n".join(lines) + "\n"


def _seed_task(args) -> list[dict]:
    scenario_dict, seed, grid = args
    sc = Scenario.from_dict(scenario_dict).with_seed(seed)
    art = run(sc)
    cam = sc.camera.build()
    out = []
    for weights in grid:
        cfg = TrackerConfig(
            camera=cam,
            weights=TrackerWeights(*weights),
            memory_alpha=sc.tracker.memory_alpha,
            acceptance_fraction=sc.tracker.acceptance_fraction,
            q_diag=sc.tracker.q_diag,
            r_diag=sc.tracker.r_diag,
            p0_diag=sc.tracker.p0_diag,
            gyro_compensation=sc.tracker.gyro_compensation,
        )
        trace = replay_track(art.events, (sc.prompt.x, sc.prompt.y),
                             sc.prompt.t, cfg)
        m = compute_metrics(trace, art.truth_trace, sc.metrics.build())
        out.append(m.as_dict())
    return out


def run_ablation(scenario: Scenario, grid=DEFAULT_GRID, n_seeds: int = 5,
                 parallel: bool = False) -> AblationResult:
    seeds = tuple(scenario.seed + k for k in range(n_seeds))
    grid = tuple(tuple(float(w) for w in row) for row in grid)
    tasks = [(scenario.to_dict(), s, grid) for s in seeds]
    if parallel:
        with ProcessPoolExecutor() as pool:
            per_seed = list(pool.map(_seed_task, tasks))
    else:
        per_seed = [_seed_task(t) for t in tasks]

    rows = []
    for j, weights in enumerate(grid):
        ms = tuple(Metrics(**per_seed[i][j]) for i in range(len(seeds)))
        rows.append(AblationRow(weights, ms))
    return AblationResult(scenario.name, seeds, tuple(rows))
