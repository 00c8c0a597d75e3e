"""Brute-force ideal-merge feasibility oracle.

Answers, per test-grid cell: does ANY piecewise-constant joint action plan
carry a full episode (600 simulated steps) with no collision? Plans hold each
vehicle's acceleration constant over a fixed decision interval; the underlying
motion, collision, gate and traffic-regeneration rules replicate the simulator
step for step. "Avoidable" therefore means a collision-free control sequence
exists that the simulator itself could execute; merging is not compulsory
(stopping short of the goal is a legitimate way to avoid collision, exactly as
a timed-out episode is collision-free in evaluation).

All arithmetic is exact: positions and velocities live on integer lattices
chosen so every reachable quantity (per-substep advance, braking-stop partial
advance, spawn spacing) is an integer. No floating-point comparison ever
decides a cell.

Search structure: traffic cooperates, so each tracked vehicle is pinned to its
pointwise-extremal policy for a target merge slot (a vehicle the ego intends
to end up ahead of yields at full brake; one it intends to follow escapes at
full throttle), reducing the joint search to a depth-first search over ego
plans, run once per slot class. Stream vehicles spawned by regeneration escape
until passed, then yield. Certificates close branches early: stopping short of
the goal at the initial common speed, or an all-vehicles-brake-to-rest rollout
that stays clean. A direct joint search over all vehicles' plans validates the
slot reduction on small cells.
"""

import json
from dataclasses import dataclass
from fractions import Fraction

GOAL_INT = 0
HORIZON_S = 60.0  # equals the simulator's 600-step episode cap


@dataclass(frozen=True)
class Resolution:
    """Lattice and plan granularity for one search resolution."""

    name: str
    decision_dt: Fraction  # action plan granularity, seconds
    substep_dt: Fraction   # collision/regeneration check granularity
    actions: tuple         # available accelerations, m/s^2, as Fractions
    vel_scale: int         # lattice: velocity int = m/s * vel_scale
    pos_scale: int         # lattice: position int = m * pos_scale

    @property
    def substeps(self) -> int:
        return int(self.decision_dt / self.substep_dt)

    @property
    def n_decisions(self) -> int:
        return int(Fraction(HORIZON_S) / self.decision_dt)

    def exact_vel(self, v) -> int:
        f = Fraction(v).limit_denominator(10**9) * self.vel_scale
        if f.denominator != 1:
            raise ValueError(f"velocity {v} not on the 1/{self.vel_scale} lattice")
        return int(f)

    def exact_pos(self, x) -> int:
        f = Fraction(x).limit_denominator(10**9) * self.pos_scale
        if f.denominator != 1:
            raise ValueError(f"position {x} not on the 1/{self.pos_scale} lattice")
        return int(f)

    def motion_tables(self):
        """Per-action integer increments for one substep.

        Returns [(dv, vmul, amul, stop_num, stop_den)] per action where the
        substep update is v' = v + dv and p' = p + vmul*v + amul, and the
        braking partial stop advances p by stop_num*v*v // stop_den (exact).
        """
        out = []
        for a in self.actions:
            dv = a * self.substep_dt * self.vel_scale
            vmul = self.substep_dt * self.pos_scale / self.vel_scale
            amul = a * self.substep_dt**2 * self.pos_scale / 2
            for val in (dv, vmul, amul):
                if Fraction(val).denominator != 1:
                    raise AssertionError(f"lattice broken for action {a}")
            if a < 0:
                stop = Fraction(self.pos_scale, 2 * -a * self.vel_scale**2)
                out.append((int(dv), int(vmul), int(amul),
                            stop.numerator, stop.denominator))
            else:
                out.append((int(dv), int(vmul), int(amul), 0, 1))
        return out


COARSE = Resolution(
    name="coarse",
    decision_dt=Fraction(1, 2),
    substep_dt=Fraction(1, 10),
    actions=(Fraction(-5), Fraction(0), Fraction(4)),
    vel_scale=10,
    pos_scale=1000,
)

FINE = Resolution(
    name="fine",
    decision_dt=Fraction(1, 4),
    substep_dt=Fraction(1, 20),
    actions=(Fraction(-5), Fraction(-5, 2), Fraction(0), Fraction(2), Fraction(4)),
    vel_scale=40,
    pos_scale=16000,
)


# Fixed cross-check fixture: a 5 ramps x 5 diffs x 2 gaps grid straddling the
# avoidability frontier, used to compare the two search resolutions cell by cell.
MINI_GRID = {
    "ramp_lengths": (0.0, 10.0, 20.0, 40.0, 100.0),
    "start_differentials": (-20.0, -10.0, -2.0, 0.0, 10.0),
    "gaps": (5.0, 25.0),
}


@dataclass(frozen=True)
class OracleCell:
    """One grid cell's geometry; all values must land on the lattice."""

    ramp_length: float
    start_differential: float
    traffic_gap: float
    initial_speed: float = 30.0
    vehicle_length: float = 5.0
    tiv_stream: float = 0.8


# traffic behavior modes
YIELD = 0    # full brake until rest (the vehicle the ego ends up ahead of)
ESCAPE = 1   # full throttle; latches to YIELD once the ego passes it
HOLD = 2     # zero acceleration (constant-speed-traffic mode)

SLOT_CLASSES = {
    # (rear tracked mode, front tracked mode)
    "between": (YIELD, ESCAPE),
    "ahead": (YIELD, YIELD),
    "behind": (ESCAPE, ESCAPE),
}


class _World:
    """Integer-lattice episode mechanics shared by all searches."""

    def __init__(self, cell: OracleCell, res: Resolution, traffic_mode=None):
        self.res = res
        self.tables = res.motion_tables()
        self.brake_idx = 0  # actions tuple starts with the strongest brake
        assert res.actions[0] == min(res.actions)
        self.L = res.exact_pos(cell.vehicle_length)
        self.v0 = res.exact_vel(cell.initial_speed)
        gap_f = Fraction(cell.tiv_stream).limit_denominator(10**9) * \
            Fraction(cell.initial_speed).limit_denominator(10**9)
        self.stream_gap = res.exact_pos(gap_f)
        self.ego0 = (-res.exact_pos(cell.ramp_length), self.v0)
        rear = self.ego0[0] + res.exact_pos(cell.start_differential)
        front = rear + res.exact_pos(cell.traffic_gap) + self.L
        self.t0_init = rear
        self.t1_init = front
        self.traffic_mode = traffic_mode  # fixed modes, or None for per-class

    def start_traffic(self, modes):
        return ((self.t0_init, self.v0, modes[0]), (self.t1_init, self.v0, modes[1]))

    def step_int(self, p, v, a_idx):
        dv, vmul, amul, sn, sd = self.tables[a_idx]
        nv = v + dv
        if nv < 0:
            return p + sn * v * v // sd, 0
        return p + vmul * v + amul, nv

    def mode_action(self, mode):
        return self.brake_idx if mode == YIELD else (
            len(self.tables) - 1 if mode == ESCAPE else self.hold_idx)

    @property
    def hold_idx(self):
        return self.res.actions.index(0)

    def advance_substep(self, ego, traffic, ego_idx, traffic_idx=None):
        """One simulator substep; returns (ego, traffic) or None on collision.

        ``traffic_idx`` overrides the per-mode actions (joint search).
        """
        ep_pre, ev = ego
        pre_max = max(t[0] for t in traffic)
        pre_min = min(t[0] for t in traffic)

        ego = self.step_int(ep_pre, ev, ego_idx)
        new_traffic = []
        for i, (p, v, mode) in enumerate(traffic):
            idx = traffic_idx[i] if traffic_idx is not None else self.mode_action(mode)
            p, v = self.step_int(p, v, idx)
            if mode == ESCAPE and ego[0] > p:
                mode = YIELD  # passed: never accelerate into the ego again
            new_traffic.append((p, v, mode))

        ep = ego[0]
        for i, (p, v, _) in enumerate(new_traffic):
            if ep > GOAL_INT and p - self.L < ep and ep - self.L < p:
                return None
            for j in range(i + 1, len(new_traffic)):
                q = new_traffic[j][0]
                if p - self.L < q and q - self.L < p:
                    return None

        now_max = max(t[0] for t in new_traffic)
        now_min = min(t[0] for t in new_traffic)
        if ep > now_max and not ep_pre > pre_max:
            idx = min(range(len(new_traffic)), key=lambda i: new_traffic[i][0])
            mode = HOLD if self.traffic_mode == HOLD else ESCAPE
            new_traffic[idx] = (ep + self.stream_gap + self.L, self.v0, mode)
        elif ep < now_min and not ep_pre < pre_min:
            idx = max(range(len(new_traffic)), key=lambda i: new_traffic[i][0])
            mode = HOLD if self.traffic_mode == HOLD else YIELD
            new_traffic[idx] = (ep - self.L - self.stream_gap, self.v0, mode)

        return ego, tuple(new_traffic)

    def advance_decision(self, ego, traffic, ego_idx):
        for _ in range(self.res.substeps):
            out = self.advance_substep(ego, traffic, ego_idx)
            if out is None:
                return None
            ego, traffic = out
        return ego, traffic

    # certificates -------------------------------------------------------

    def stop_short_initial(self, cell: OracleCell) -> bool:
        """At t=0 everyone shares one speed: if the ego can brake to rest
        without its front bumper passing the goal, holding speed forever is
        collision-free for every traffic vehicle (constant equal speeds,
        spawns at stream spacing and stream speed)."""
        p, v = self.ego0
        # full-brake stop distance, exact on the lattice
        _, _, _, sn, sd = self.tables[self.brake_idx]
        dv = -self.tables[self.brake_idx][0]
        full, rem = divmod(v, dv)
        dist = 0
        vv = v
        for _ in range(full):
            dist += self.tables[self.brake_idx][1] * vv + self.tables[self.brake_idx][2]
            vv -= dv
        if rem:
            dist += sn * vv * vv // sd
        return p + dist <= GOAL_INT

    def all_brake_clean(self, ego, traffic, substeps_left) -> bool:
        """Every vehicle brakes to rest; clean until universal standstill
        means clean forever (a standstill generates no further events)."""
        n = 0
        while n < substeps_left:
            if ego[1] == 0 and all(t[1] == 0 for t in traffic):
                return True
            out = self.advance_substep(ego, traffic, self.brake_idx,
                                       traffic_idx=[self.brake_idx] * len(traffic))
            if out is None:
                return False
            ego, traffic = out
            n += 1
        return True


def _search_ego(world: _World, traffic0, max_states=None):
    """Depth-first search over ego plans against the fixed traffic behavior."""
    res = world.res
    n_dec = res.n_decisions
    substeps_total = n_dec * res.substeps
    seen = set()
    # try coasting first, then throttle, then brakes: feasible cells resolve fast
    order = sorted(range(len(res.actions)),
                   key=lambda i: (abs(res.actions[i]), -res.actions[i]))

    def rec(k, ego, traffic):
        if k >= n_dec:
            return True
        left = substeps_total - k * res.substeps
        if world.all_brake_clean(ego, traffic, left):
            return True
        key = (k, ego, traffic)
        if key in seen:
            return False
        if max_states is not None and len(seen) > max_states:
            raise RuntimeError("oracle search exceeded its state budget")
        for idx in order:
            out = world.advance_decision(ego, traffic, idx)
            if out is not None and rec(k + 1, *out):
                return True
        seen.add(key)
        return False

    return rec(0, world.ego0, traffic0)


def avoidable(cell: OracleCell, res: Resolution = COARSE,
              constant_traffic: bool = False, max_states=None) -> bool:
    """Can a full episode end collision-free under ideal joint control?"""
    if constant_traffic:
        world = _World(cell, res, traffic_mode=HOLD)
        if world.stop_short_initial(cell):
            return True
        return _search_ego(world, world.start_traffic((HOLD, HOLD)), max_states)
    world = _World(cell, res)
    if world.stop_short_initial(cell):
        return True
    for modes in SLOT_CLASSES.values():
        if _search_ego(world, world.start_traffic(modes), max_states):
            return True
    return False


def avoidable_joint(cell: OracleCell, res: Resolution = COARSE,
                    horizon_decisions: int | None = None, max_states=None) -> bool:
    """Direct joint search: every vehicle's plan is free. Validation only.

    Branching is |actions|^3 per decision interval, so keep the horizon short;
    certificates still close surviving branches early.
    """
    world = _World(cell, res)
    if world.stop_short_initial(cell):
        return True
    n_dec = horizon_decisions or res.n_decisions
    substeps_total = res.n_decisions * res.substeps
    n_act = len(res.actions)
    seen = set()

    def advance(ego, traffic, ego_idx, t_idx):
        for _ in range(res.substeps):
            out = world.advance_substep(ego, traffic, ego_idx, traffic_idx=t_idx)
            if out is None:
                return None
            ego, traffic = out
        return ego, traffic

    def rec(k, ego, traffic):
        if k >= n_dec:
            return True
        left = substeps_total - k * res.substeps
        if world.all_brake_clean(ego, traffic, left):
            return True
        key = (k, ego, traffic)
        if key in seen:
            return False
        if max_states is not None and len(seen) > max_states:
            raise RuntimeError("oracle search exceeded its state budget")
        for e in range(n_act):
            for i in range(n_act):
                for j in range(n_act):
                    out = advance(ego, traffic, e, [i, j])
                    if out is not None and rec(k + 1, *out):
                        return True
        seen.add(key)
        return False

    traffic0 = world.start_traffic((YIELD, YIELD))  # modes unused under overrides
    return rec(0, world.ego0, traffic0)


def grid_avoidability(ramp_lengths, start_differentials, gaps,
                      res: Resolution = COARSE, constant_traffic: bool = False,
                      speed: float = 30.0, length: float = 5.0,
                      tiv_stream: float = 0.8, max_states=None) -> dict:
    """Avoidability over a full grid, keyed (ramp, diff, gap)."""
    out = {}
    for gap in gaps:
        for ramp in ramp_lengths:
            for diff in start_differentials:
                cell = OracleCell(ramp_length=ramp, start_differential=diff,
                                  traffic_gap=gap, initial_speed=speed,
                                  vehicle_length=length, tiv_stream=tiv_stream)
                out[(float(ramp), float(diff), float(gap))] = avoidable(
                    cell, res, constant_traffic=constant_traffic,
                    max_states=max_states)
    return out


def monotonicity_violations(table: dict) -> list:
    """Avoidability must not decrease with gap or with ramp length.

    Returns [(kind, worse_key, better_key)] where an avoidable cell turned
    unavoidable as gap or ramp increased with everything else fixed.
    """
    bad = []
    ramps = sorted({k[0] for k in table})
    diffs = sorted({k[1] for k in table})
    gaps = sorted({k[2] for k in table})
    for d in diffs:
        for r in ramps:
            for g1, g2 in zip(gaps, gaps[1:]):
                if table[(r, d, g1)] and not table[(r, d, g2)]:
                    bad.append(("gap", (r, d, g1), (r, d, g2)))
        for g in gaps:
            for r1, r2 in zip(ramps, ramps[1:]):
                if table[(r1, d, g)] and not table[(r2, d, g)]:
                    bad.append(("ramp", (r1, d, g), (r2, d, g)))
    return bad


def save_table(path, table: dict, meta: dict | None = None) -> None:
    rows = [{"ramp": k[0], "diff": k[1], "gap": k[2], "avoidable": v}
            for k, v in sorted(table.items())]
    with open(path, "w") as fh:
        json.dump({"meta": meta or {}, "cells": rows}, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_table(path) -> dict:
    with open(path) as fh:
        data = json.load(fh)
    return {(r["ramp"], r["diff"], r["gap"]): r["avoidable"] for r in data["cells"]}
