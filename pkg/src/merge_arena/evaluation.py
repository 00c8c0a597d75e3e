"""Standardized collision-table evaluation and checkpoint selection.

The standard test sweeps a grid of episode geometries (ramp length x start
differential x initial traffic gap), runs a fixed number of deterministic
episodes per cell under each traffic action policy, and tabulates collision
percentages alongside the ego's acceleration statistics. A mixture table is
the unweighted mean of the three per-policy tables.

Every cell is an independent pure computation seeded from (grid seed, cell
index, policy index), so results are reproducible and identical whether cells
run serially or across a process pool.
"""

import csv
import json
import os
from dataclasses import dataclass, field, fields
from multiprocessing import get_context

import numpy as np

from . import nets, oracle
from .checkpoint import load_actor
from .observation import MERGE_DIM, TRAFFIC_DIM
from .reward import RewardSpec
from .scene import SceneConfig, SimParams
from .training import run_eval_episode

POLICIES = ("constant", "random", "reactive")

GAP_DEFAULTS = {
    "three_vehicle": (5.0, 10.0, 15.0, 25.0, 100.0),
    "full_scene": (5.0, 15.0, 25.0),
}


@dataclass
class TestGrid:
    """Cell axes and fixed episode parameters of the standard test."""

    __test__ = False  # not a test case despite the name

    variant: str = "three_vehicle"
    ramp_lengths: tuple = tuple(float(r) for r in range(40, 261, 20))
    start_differentials: tuple = tuple(float(d) for d in range(-20, 21, 5))
    gaps: tuple | None = None  # None -> variant default
    policies: tuple = POLICIES
    episodes_per_cell_per_policy: int = 34
    tiv_test: float = 0.8
    initial_speed: float = 30.0
    vehicle_length: float = 5.0
    traffic_count: int = 6
    lead_merge_offset: float = 20.0

    def __post_init__(self):
        if self.variant not in GAP_DEFAULTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.gaps is None:
            self.gaps = GAP_DEFAULTS[self.variant]
        self.ramp_lengths = tuple(float(r) for r in self.ramp_lengths)
        self.start_differentials = tuple(float(d) for d in self.start_differentials)
        self.gaps = tuple(float(g) for g in self.gaps)
        self.policies = tuple(self.policies)
        if self.episodes_per_cell_per_policy < 1:
            raise ValueError("episodes_per_cell_per_policy must be at least 1")
        if any(g <= 0 for g in self.gaps):
            raise ValueError("all gaps must be positive")
        for p in self.policies:
            if p not in POLICIES:
                raise ValueError(f"unknown traffic policy {p!r}")

    def cell_keys(self):
        """Geometry cells in canonical order (gap, then ramp, then diff)."""
        return [(r, d, g) for g in self.gaps for r in self.ramp_lengths
                for d in self.start_differentials]


@dataclass
class CellResult:
    """Outcome and ego-action statistics for one grid cell under one policy."""

    ramp_length: float
    start_differential: float
    gap: float
    policy: str
    episodes: float = 0
    collisions: float = 0
    successes: float = 0
    timeouts: float = 0
    avg_accel: float = 0.0
    avg_decel: float = 0.0
    accel_count: float = 0
    decel_count: float = 0
    action_total: float = 0  # includes zero actions

    @property
    def collision_pct(self) -> float:
        return 100.0 * self.collisions / self.episodes

    @property
    def bias(self) -> float:
        if self.action_total == 0:
            return 0.0
        return (self.decel_count - self.accel_count) / self.action_total

    @property
    def key(self):
        return (self.ramp_length, self.start_differential, self.gap)


def summarize_actions(trajectories):
    """(avg accel, avg decel, accel count, decel count, bias) over trajectories.

    Actions partition by sign; zeros count toward neither side but do appear
    in the bias denominator. Averages are of magnitudes, 0.0 for an empty side.
    """
    arrays = [np.asarray(t, dtype=np.float64) for t in trajectories]
    if not arrays or sum(a.size for a in arrays) == 0:
        raise ValueError("no actions to summarize")
    a = np.concatenate([x.ravel() for x in arrays])
    pos = a[a > 0]
    neg = a[a < 0]
    avg_accel = float(pos.mean()) if pos.size else 0.0
    avg_decel = float(-neg.mean()) if neg.size else 0.0
    bias = (neg.size - pos.size) / a.size
    return avg_accel, avg_decel, int(pos.size), int(neg.size), bias


def _cell_scene_cfg(grid: TestGrid, ramp, diff, gap, policy) -> SceneConfig:
    n_traffic = 2 if grid.variant == "three_vehicle" else 4
    return SceneConfig(
        variant=grid.variant,
        ramp_length=ramp,
        start_differential=diff,
        traffic_gap=gap,
        initial_speed=grid.initial_speed,
        tiv_stream=grid.tiv_test,
        merge_length=grid.vehicle_length,
        traffic_length=grid.vehicle_length,
        traffic_count=grid.traffic_count,
        lead_merge_offset=grid.lead_merge_offset,
        traffic_policies=(policy,) * n_traffic,
    )


def run_cell(grid: TestGrid, ramp, diff, gap, policy,
             merge_theta, traffic_theta, entropy) -> CellResult:
    """All episodes of one (geometry, policy) cell from a fixed seed."""
    cfg = _cell_scene_cfg(grid, ramp, diff, gap, policy)
    params = SimParams()
    spec = RewardSpec()
    rng = np.random.default_rng(np.random.SeedSequence(entropy))
    res = CellResult(ramp, diff, gap, policy)
    actions = []
    for _ in range(grid.episodes_per_cell_per_policy):
        out = run_eval_episode(cfg, params, spec, merge_theta, traffic_theta, rng)
        res.episodes += 1
        if out.status == "collision":
            res.collisions += 1
        elif out.status == "success":
            res.successes += 1
        else:
            res.timeouts += 1
        actions.append(out.ego_actions)
    res.avg_accel, res.avg_decel, res.accel_count, res.decel_count, _ = (
        summarize_actions(actions))
    res.action_total = int(sum(a.size for a in actions))
    return res


def _cell_task(args):
    grid, ramp, diff, gap, policy, merge_theta, traffic_theta, entropy = args
    return run_cell(grid, ramp, diff, gap, policy, merge_theta, traffic_theta,
                    entropy)


@dataclass
class CollisionTable:
    grid: TestGrid
    cells: dict = field(default_factory=dict)  # (ramp, diff, gap, policy) -> CellResult

    def cell(self, ramp, diff, gap, policy) -> CellResult:
        return self.cells[(float(ramp), float(diff), float(gap), policy)]

    def policy_cells(self, policy):
        return [c for c in self.cells.values() if c.policy == policy]

    def total_collisions(self, policy=None) -> float:
        pool = self.cells.values() if policy is None else self.policy_cells(policy)
        return sum(c.collisions for c in pool)

    def mixture(self) -> dict:
        """Unweighted per-cell mean over the grid's policies, keyed by geometry."""
        out = {}
        n = len(self.grid.policies)
        numeric = [f.name for f in fields(CellResult)
                   if f.name not in ("ramp_length", "start_differential", "gap",
                                     "policy")]
        for key in self.grid.cell_keys():
            per = [self.cells[key + (p,)] for p in self.grid.policies]
            mix = CellResult(*key, "mixture")
            for name in numeric:
                setattr(mix, name, sum(getattr(c, name) for c in per) / n)
            out[key] = mix
        return out

    def collision_free_keys(self):
        """Geometry cells with zero collisions across every policy."""
        free = []
        for key in self.grid.cell_keys():
            if all(self.cells[key + (p,)].collisions == 0
                   for p in self.grid.policies):
                free.append(key)
        return free


def collision_table(grid: TestGrid, merge_theta, traffic_theta,
                    seed_root=(0,), jobs: int = 1) -> CollisionTable:
    """Run the full grid; identical output for any jobs count."""
    if "reactive" in grid.policies and traffic_theta is None:
        raise ValueError("reactive traffic requires traffic actor weights")
    root = tuple(int(s) for s in np.atleast_1d(seed_root))
    tasks = []
    for ci, (ramp, diff, gap) in enumerate(grid.cell_keys()):
        for pi, policy in enumerate(grid.policies):
            entropy = root + (ci, pi)
            tasks.append((grid, ramp, diff, gap, policy,
                          merge_theta, traffic_theta, entropy))

    table = CollisionTable(grid=grid)
    if jobs <= 1:
        results = map(_cell_task, tasks)
    else:
        ctx = get_context()
        with ctx.Pool(processes=jobs) as pool:
            results = pool.map(_cell_task, tasks, chunksize=1)
    for res in results:
        table.cells[res.key + (res.policy,)] = res
    return table


def run_test_grid(merge_ckpt, traffic_ckpt, grid: TestGrid,
                  seed_root=(0,), jobs: int = 1) -> CollisionTable:
    """Grid evaluation straight from checkpoint files, dimensions validated."""
    merge_theta, _ = load_actor(merge_ckpt, expect_obs_dim=MERGE_DIM[grid.variant])
    traffic_theta = None
    if traffic_ckpt is not None:
        traffic_theta, _ = load_actor(traffic_ckpt,
                                      expect_obs_dim=TRAFFIC_DIM[grid.variant])
    return collision_table(grid, merge_theta, traffic_theta, seed_root, jobs)


def zero_weight_actor(variant: str) -> np.ndarray:
    """All-zero merge policy; the comparison baseline for trained checkpoints."""
    return nets.zero_params(MERGE_DIM[variant])


def table_summary(table: CollisionTable) -> dict:
    """Scalar metrics of one table, the unit checkpoint selection works on."""
    cells = list(table.cells.values())
    episodes = sum(c.episodes for c in cells)
    total_actions = sum(c.action_total for c in cells)
    accel_count = sum(c.accel_count for c in cells)
    decel_count = sum(c.decel_count for c in cells)
    accel_mass = sum(c.avg_accel * c.accel_count for c in cells)
    decel_mass = sum(c.avg_decel * c.decel_count for c in cells)
    summary = {
        "episodes": episodes,
        "collisions": sum(c.collisions for c in cells),
        "successes": sum(c.successes for c in cells),
        "timeouts": sum(c.timeouts for c in cells),
        "avg_accel": accel_mass / accel_count if accel_count else 0.0,
        "avg_decel": decel_mass / decel_count if decel_count else 0.0,
        "accel_count": accel_count,
        "decel_count": decel_count,
        "bias": ((decel_count - accel_count) / total_actions
                 if total_actions else 0.0),
        "per_policy": {
            p: {
                "collisions": table.total_collisions(p),
                "episodes": sum(c.episodes for c in table.policy_cells(p)),
            }
            for p in table.grid.policies
        },
    }
    summary["collision_pct"] = 100.0 * summary["collisions"] / episodes
    return summary


def checkpoint_summary(cfg, episode: int, merge_path, traffic_path, out_path,
                       grid: TestGrid | None = None, jobs: int = 1) -> dict:
    """Standard-test summary of one checkpoint pair, written as JSON.

    Defaults to the 15 m gap grid, seeded from (train seed, episode) so every
    checkpoint of a run is scored on its own fixed episode set.
    """
    if grid is None:
        grid = TestGrid(variant=cfg.variant, gaps=(15.0,))
    table = run_test_grid(merge_path, traffic_path, grid,
                          seed_root=(cfg.seed, episode), jobs=jobs)
    summary = table_summary(table)
    summary["episode"] = episode
    summary["merge_checkpoint"] = os.path.basename(str(merge_path))
    summary["traffic_checkpoint"] = os.path.basename(str(traffic_path))
    summary["gaps"] = list(grid.gaps)
    with open(out_path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def select_best(summaries) -> int:
    """Checkpoint with the fewest collisions.

    Ties go to the stronger deceleration bias, then to the earlier episode.
    """
    summaries = list(summaries)
    if not summaries:
        raise ValueError("no checkpoint summaries to select from")
    best = min(summaries,
               key=lambda s: (s["collisions"], -s.get("bias", 0.0), s["episode"]))
    return best["episode"]


def load_summaries(paths) -> list:
    out = []
    for p in paths:
        with open(p) as fh:
            out.append(json.load(fh))
    return sorted(out, key=lambda s: s["episode"])


def oracle_overlay(grid: TestGrid, res=oracle.COARSE, constant_traffic=False,
                   max_states=None) -> dict:
    """Feasibility verdict for every geometry cell of the grid."""
    return oracle.grid_avoidability(
        grid.ramp_lengths, grid.start_differentials, grid.gaps, res=res,
        constant_traffic=constant_traffic, speed=grid.initial_speed,
        length=grid.vehicle_length, tiv_stream=grid.tiv_test,
        max_states=max_states)


def dominance_violations(table: CollisionTable, overlay: dict) -> list:
    """Cells collision-free in the table yet unavoidable for the oracle.

    A non-empty result is a logical inconsistency: no controller can beat
    ideal joint action selection.
    """
    return sorted(k for k in table.collision_free_keys() if not overlay[k])


def write_cells_csv(table: CollisionTable, path, include_mixture=True,
                    overlay: dict | None = None):
    """Flat table, one row per geometry cell per policy.

    With an oracle overlay the rows gain an ``oracle_avoidable`` 0/1 column.
    """
    cols = ["ramp_length", "start_differential", "gap", "policy", "episodes",
            "collisions", "successes", "timeouts", "collision_pct",
            "avg_accel", "avg_decel", "accel_count", "decel_count", "bias"]
    rows = list(table.cells.values())
    if include_mixture:
        rows += list(table.mixture().values())
    rows.sort(key=lambda c: (c.gap, c.policy, c.ramp_length,
                             c.start_differential))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols + (["oracle_avoidable"] if overlay is not None else []))
        for c in rows:
            row = [repr(getattr(c, name)) if isinstance(getattr(c, name), float)
                   else getattr(c, name) for name in cols]
            if overlay is not None:
                row.append(int(overlay[c.key]))
            w.writerow(row)
    return path


def _fmt(x: float) -> str:
    return f"{x:g}"


def write_pivot_csvs(table: CollisionTable, out_dir, include_mixture=True):
    """Per-gap collision-percentage tables, ramps as rows, differentials as
    columns; one file per policy plus the mixture."""
    os.makedirs(out_dir, exist_ok=True)
    grid = table.grid
    sources = {p: {k: table.cells[k + (p,)] for k in grid.cell_keys()}
               for p in grid.policies}
    if include_mixture:
        sources["mixture"] = table.mixture()
    paths = []
    for gap in grid.gaps:
        for policy, cells in sources.items():
            path = os.path.join(out_dir, f"table_{_fmt(gap)}_{policy}.csv")
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["ramp_length"]
                           + [_fmt(d) for d in grid.start_differentials])
                for ramp in grid.ramp_lengths:
                    w.writerow([_fmt(ramp)]
                               + [repr(cells[(ramp, d, gap)].collision_pct)
                                  for d in grid.start_differentials])
            paths.append(path)
    return paths


def write_oracle_csvs(overlay: dict, grid: TestGrid, out_dir):
    """Feasibility in the same pivot layout, 1 avoidable / 0 unavoidable."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for gap in grid.gaps:
        path = os.path.join(out_dir, f"table_{_fmt(gap)}_oracle.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["ramp_length"]
                       + [_fmt(d) for d in grid.start_differentials])
            for ramp in grid.ramp_lengths:
                w.writerow([_fmt(ramp)]
                           + [int(overlay[(ramp, d, gap)])
                              for d in grid.start_differentials])
        paths.append(path)
    return paths
