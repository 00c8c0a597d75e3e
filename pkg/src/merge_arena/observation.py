"""Fixed-order, range-clipped observation vectors for merge and traffic vehicles.

Feature order and ranges follow the standard state table for both variants:
merge vehicles see 6 features (7 in the full scene, adding the TIV to the
merge vehicle ahead); traffic vehicles see 5 (8 in the full scene, where the
single merge gap/speed/proximity triple splits into rear and front slots).

Gaps are bumper-to-bumper (front bumper of the rear body to rear bumper of
the front body); negative gap means overlap. Closing speeds are positive when
the gap is shrinking. Missing neighbors contribute phantom defaults (100 m
gap, 0 closing speed) before clipping.
"""

import numpy as np

from .scene import GOAL, Scene, Vehicle

GAP_LO, GAP_HI = -2.5, 30.0
CLOSE_LO, CLOSE_HI = -10.0, 10.0
GOAL_GAP_LO, GOAL_GAP_HI = -160.0, 150.0
GOAL_VEL_LO, GOAL_VEL_HI = 0.0, 40.0
TIV_LO, TIV_HI = 0.0, 2.5
TTG_LO, TTG_HI = 0.0, 3.0

PHANTOM_GAP = 100.0
PHANTOM_CLOSING = 0.0

MERGE_DIM = {"three_vehicle": 6, "full_scene": 7}
TRAFFIC_DIM = {"three_vehicle": 5, "full_scene": 8}


def clip(x: float, lo: float, hi: float) -> float:
    return min(max(x, lo), hi)


def tiv(gap: float, rear_vel: float) -> float:
    """Time in-between vehicles: gap over the rear (following) vehicle's speed.

    A stopped follower reads the range maximum.
    """
    if rear_vel <= 0.0:
        return TIV_HI
    return clip(gap / rear_vel, TIV_LO, TIV_HI)


def feature_names(variant: str, kind: str) -> list:
    if kind == "merge":
        names = [
            "gap_rear_traffic",
            "closing_speed_rear_traffic",
            "gap_front_traffic",
            "closing_speed_front_traffic",
            "gap_to_goal",
            "closing_velocity_to_goal",
        ]
        if variant == "full_scene":
            names.append("tiv_front_merge")
        return names
    names = [
        "gap_rear_merge" if variant == "full_scene" else "gap_merge",
        "closing_speed_rear_merge" if variant == "full_scene" else "closing_speed_merge",
    ]
    if variant == "full_scene":
        names += ["gap_front_merge", "closing_speed_front_merge"]
    names += ["tiv_front", "time_to_goal"]
    if variant == "full_scene":
        names += ["proximity_front", "proximity_rear"]
    else:
        names += ["proximity"]
    return names


def _nearest(iterable, behind_of=None, ahead_of=None):
    """Nearest vehicle behind (pos <= ref, ties count as behind) or ahead (pos > ref)."""
    if behind_of is not None:
        cands = [v for v in iterable if v.pos <= behind_of]
        return max(cands, key=lambda v: (v.pos, v.vid)) if cands else None
    cands = [v for v in iterable if v.pos > ahead_of]
    return min(cands, key=lambda v: (v.pos, v.vid)) if cands else None


def lane_front_vehicle(scene: Scene, v: Vehicle):
    """Nearest vehicle ahead of ``v`` in the traffic lane.

    Includes merge vehicles whose front bumper has passed the goal; they are
    physically in the lane from that point on.
    """
    members = [u for u in scene.vehicles if u.vid != v.vid and scene.in_traffic_lane(u)]
    return _nearest(members, ahead_of=v.pos)


def front_gap(v: Vehicle, front: Vehicle) -> float:
    return front.rear - v.pos


def merge_observation(scene: Scene, vid: int, raw: bool = False) -> np.ndarray:
    """Observation for a merge-lane vehicle; ``raw=True`` skips clipping."""
    me = scene.vehicle(vid)
    if me.kind != "merge":
        raise ValueError(f"vehicle {vid} is not a merge vehicle")
    traffic = scene.traffic_vehicles()
    rear = _nearest(traffic, behind_of=me.pos)
    front = _nearest(traffic, ahead_of=me.pos)

    if rear is None:
        gap_rear, close_rear = PHANTOM_GAP, PHANTOM_CLOSING
    else:
        gap_rear = me.rear - rear.pos
        close_rear = rear.vel - me.vel
    if front is None:
        gap_front, close_front = PHANTOM_GAP, PHANTOM_CLOSING
    else:
        gap_front = front.rear - me.pos
        close_front = me.vel - front.vel

    vals = [gap_rear, close_rear, gap_front, close_front, GOAL - me.pos, me.vel]

    if scene.cfg.variant == "full_scene":
        lead = _nearest(scene.merge_vehicles(), ahead_of=me.pos)
        gap_lead = PHANTOM_GAP if lead is None else lead.rear - me.pos
        if raw:
            vals.append(gap_lead / me.vel if me.vel > 0.0 else float("inf"))
        else:
            vals.append(tiv(gap_lead, me.vel))

    if raw:
        return np.array(vals, dtype=np.float64)
    return np.array(
        [
            clip(vals[0], GAP_LO, GAP_HI),
            clip(vals[1], CLOSE_LO, CLOSE_HI),
            clip(vals[2], GAP_LO, GAP_HI),
            clip(vals[3], CLOSE_LO, CLOSE_HI),
            clip(vals[4], GOAL_GAP_LO, GOAL_GAP_HI),
            clip(vals[5], GOAL_VEL_LO, GOAL_VEL_HI),
        ]
        + ([vals[6]] if len(vals) == 7 else []),
        dtype=np.float64,
    )


def traffic_observation(scene: Scene, vid: int, raw: bool = False) -> np.ndarray:
    """Observation for a traffic-lane vehicle; ``raw=True`` skips clipping."""
    me = scene.vehicle(vid)
    if me.kind != "traffic":
        raise ValueError(f"vehicle {vid} is not a traffic vehicle")
    merges = scene.merge_vehicles()

    front_in_lane = lane_front_vehicle(scene, me)
    gap_lane = PHANTOM_GAP if front_in_lane is None else front_gap(me, front_in_lane)
    tiv_feat = tiv(gap_lane, me.vel)
    if me.vel <= 0.0:
        raw_tiv = float("inf")
        raw_ttg = float("inf")
        ttg = TTG_HI
    else:
        raw_tiv = gap_lane / me.vel
        raw_ttg = (GOAL - me.pos) / me.vel
        ttg = clip(raw_ttg, TTG_LO, TTG_HI)

    if scene.cfg.variant == "three_vehicle":
        ego = scene.ego
        # single signed body distance to the one merge vehicle
        gap = max(ego.rear - me.pos, me.rear - ego.pos)
        ahead = ego.pos > me.pos  # ego in front of this traffic vehicle
        closing = (me.vel - ego.vel) if ahead else (ego.vel - me.vel)
        prox = 1.0 if me.pos > ego.pos else -1.0
        if raw:
            return np.array([gap, closing, raw_tiv, raw_ttg, prox], dtype=np.float64)
        return np.array(
            [
                clip(gap, GAP_LO, GAP_HI),
                clip(closing, CLOSE_LO, CLOSE_HI),
                tiv_feat,
                ttg,
                prox,
            ],
            dtype=np.float64,
        )

    rear_m = _nearest(merges, behind_of=me.pos)
    front_m = _nearest(merges, ahead_of=me.pos)
    if rear_m is None:
        gap_rear, close_rear, prox_rear = PHANTOM_GAP, PHANTOM_CLOSING, -1.0
    else:
        gap_rear = me.rear - rear_m.pos
        close_rear = rear_m.vel - me.vel
        prox_rear = 1.0
    if front_m is None:
        gap_front, close_front, prox_front = PHANTOM_GAP, PHANTOM_CLOSING, -1.0
    else:
        gap_front = front_m.rear - me.pos
        close_front = me.vel - front_m.vel
        prox_front = 1.0
    if raw:
        return np.array(
            [gap_rear, close_rear, gap_front, close_front, raw_tiv,
             raw_ttg, prox_front, prox_rear],
            dtype=np.float64,
        )
    return np.array(
        [
            clip(gap_rear, GAP_LO, GAP_HI),
            clip(close_rear, CLOSE_LO, CLOSE_HI),
            clip(gap_front, GAP_LO, GAP_HI),
            clip(close_front, CLOSE_LO, CLOSE_HI),
            tiv_feat,
            ttg,
            prox_front,
            prox_rear,
        ],
        dtype=np.float64,
    )


def observe(scene: Scene, vid: int) -> np.ndarray:
    v = scene.vehicle(vid)
    if v.kind == "merge":
        return merge_observation(scene, vid)
    return traffic_observation(scene, vid)
