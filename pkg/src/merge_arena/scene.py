"""Taper-ramp merge world.

Two parallel longitudinal axes (a merge ramp and a through-traffic lane)
converge at the goal line, fixed at coordinate 0. Positions are front-bumper
coordinates along the shared axis; a vehicle's body occupies
[pos - length, pos]. The ego vehicle starts ramp_length upstream of the goal
and must be fully past the goal line, collision-free, to finish.

Vehicles in different lanes do not interact until the merge vehicle's front
bumper has passed the goal line (the taper convergence point); from then on
it occupies the traffic lane. There are no lateral dynamics.
"""

from dataclasses import dataclass, field, replace

GOAL = 0.0

ACCEL_MIN = -5.0
ACCEL_MAX = 4.0


@dataclass
class SimParams:
    """Fixed integration and episode-termination parameters."""

    dt: float = 0.1
    accel_min: float = ACCEL_MIN
    accel_max: float = ACCEL_MAX
    max_steps: int = 600
    settle_window: float = 1.0  # seconds past the goal that must stay collision-free

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not (self.accel_min < 0 < self.accel_max):
            raise ValueError("acceleration range must straddle 0")

    @property
    def settle_steps(self) -> int:
        return int(round(self.settle_window / self.dt))


@dataclass
class SceneConfig:
    """One episode's geometry and stream parameters.

    ``start_differential`` is the signed offset from ego's front bumper to the
    front bumper of the nearest (tracked-rear) traffic vehicle at t=0; the
    second tracked vehicle sits ``traffic_gap`` bumper-to-bumper ahead of it.
    ``tiv_stream`` spaces any further stream traffic and regenerated spawns.
    """

    variant: str = "three_vehicle"  # or "full_scene"
    ramp_length: float = 150.0
    start_differential: float = 0.0
    traffic_gap: float = 15.0
    initial_speed: float = 30.0
    tiv_stream: float = 0.8
    merge_length: float = 5.0
    traffic_length: float = 5.0
    traffic_count: int = 6  # full-scene cap on live traffic vehicles
    lead_merge_offset: float = 20.0  # full-scene only
    traffic_policies: tuple = ("constant", "constant")

    def __post_init__(self):
        if self.variant not in ("three_vehicle", "full_scene"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.ramp_length <= 0:
            raise ValueError("ramp_length must be positive")
        if self.traffic_count < 2:
            raise ValueError("traffic_count must be at least 2")


@dataclass
class Vehicle:
    vid: int
    kind: str  # 'merge' | 'traffic'
    role: str  # 'ego' | 'front_merge' | 'traffic'
    pos: float
    vel: float
    length: float
    policy: str  # 'net' | 'constant' | 'random' | 'reactive'

    @property
    def rear(self) -> float:
        return self.pos - self.length


@dataclass
class Event:
    kind: str  # 'crossed_goal' | 'collision' | 'spawn' | 'despawn' | 'completed'
    vid: int
    other: int | None = None


@dataclass
class Scene:
    params: SimParams
    cfg: SceneConfig
    vehicles: list
    step_count: int = 0
    status: str = "running"  # -> 'success' | 'collision' | 'timeout', then frozen
    fault: dict = field(default_factory=dict)  # vid -> True (at fault) / False
    crossed_front_step: dict = field(default_factory=dict)  # vid -> step of gate opening
    crossed_rear_step: dict = field(default_factory=dict)  # vid -> step rear cleared goal
    completed: set = field(default_factory=set)
    next_vid: int = 0

    @property
    def t(self) -> float:
        return self.step_count * self.params.dt

    def vehicle(self, vid: int) -> Vehicle:
        for v in self.vehicles:
            if v.vid == vid:
                return v
        raise KeyError(f"no vehicle {vid}")

    def merge_vehicles(self) -> list:
        return [v for v in self.vehicles if v.kind == "merge"]

    def traffic_vehicles(self) -> list:
        return [v for v in self.vehicles if v.kind == "traffic"]

    @property
    def ego(self) -> Vehicle:
        for v in self.vehicles:
            if v.role == "ego":
                return v
        raise LookupError("scene has no ego")

    def in_traffic_lane(self, v: Vehicle) -> bool:
        """Traffic always; a merge vehicle once its front bumper passed the goal."""
        return v.kind == "traffic" or v.pos > GOAL

    def copy(self) -> "Scene":
        return replace(
            self,
            vehicles=[replace(v) for v in self.vehicles],
            fault=dict(self.fault),
            crossed_front_step=dict(self.crossed_front_step),
            crossed_rear_step=dict(self.crossed_rear_step),
            completed=set(self.completed),
        )


def step_vehicle(pos: float, vel: float, accel: float, dt: float,
                 accel_min: float = ACCEL_MIN, accel_max: float = ACCEL_MAX):
    """Exact constant-acceleration update with a velocity floor at zero.

    Out-of-range accelerations are clipped, not rejected. If the velocity
    would cross zero within the step the vehicle advances only its stopping
    distance vel^2 / (2|a|) and halts; no reversing on the ramp.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    a = min(max(accel, accel_min), accel_max)
    nv = vel + a * dt
    if nv < 0.0:
        # a < 0 here since vel >= 0
        return pos + vel * vel / (2.0 * abs(a)), 0.0
    return pos + vel * dt + 0.5 * a * dt * dt, nv


def init_episode(cfg: SceneConfig, params: SimParams | None = None) -> Scene:
    """Build the t=0 scene for either variant.

    Deterministic in its arguments; training-mode randomization happens in the
    caller by sampling the config fields. Rejects configurations that place
    two same-lane vehicles overlapping at t=0.
    """
    params = params or SimParams()
    scene = Scene(params=params, cfg=cfg, vehicles=[])
    v0 = cfg.initial_speed
    ego_pos = -cfg.ramp_length

    def add(kind, role, pos, length, policy):
        veh = Vehicle(scene.next_vid, kind, role, pos, v0, length, policy)
        scene.next_vid += 1
        scene.vehicles.append(veh)
        return veh

    add("merge", "ego", ego_pos, cfg.merge_length, "net")
    if cfg.variant == "full_scene":
        add("merge", "front_merge", ego_pos + cfg.lead_merge_offset, cfg.merge_length, "net")

    pol = list(cfg.traffic_policies)

    def traffic_policy(i):
        return pol[i % len(pol)]

    rear = add("traffic", "traffic", ego_pos + cfg.start_differential,
               cfg.traffic_length, traffic_policy(0))
    front = add("traffic", "traffic", rear.pos + cfg.traffic_gap + cfg.traffic_length,
                cfg.traffic_length, traffic_policy(1))

    if cfg.variant == "full_scene":
        stream_gap = cfg.tiv_stream * v0
        if len(scene.traffic_vehicles()) < cfg.traffic_count:
            add("traffic", "traffic", rear.rear - stream_gap, cfg.traffic_length,
                traffic_policy(2))
        if len(scene.traffic_vehicles()) < cfg.traffic_count:
            add("traffic", "traffic", front.pos + stream_gap + cfg.traffic_length,
                cfg.traffic_length, traffic_policy(3))

    _reject_initial_overlaps(scene)
    return scene


def _reject_initial_overlaps(scene: Scene) -> None:
    vs = scene.vehicles
    for i in range(len(vs)):
        for j in range(i + 1, len(vs)):
            a, b = vs[i], vs[j]
            if a.kind == b.kind and _bodies_overlap(a, b):
                raise ValueError(
                    f"vehicles {a.vid} and {b.vid} overlap at t=0 "
                    f"(pos {a.pos}, {b.pos})"
                )


def _bodies_overlap(a: Vehicle, b: Vehicle) -> bool:
    # strict: bumper-to-bumper contact (gap exactly 0) is not a collision
    return a.rear < b.pos and b.rear < a.pos


def detect_collisions(scene: Scene) -> list:
    """Overlapping interacting pairs with fault assignment.

    Returns [(vid_a, vid_b, at_fault_vid), ...]. Interaction: same lane
    always; merge vs traffic only once the merge vehicle's front bumper has
    passed the goal. Fault: a merge vehicle inserting the step its gate opens
    is at fault; otherwise the striker (front bumper inside the other's body);
    mutual overlap resolves to the merge vehicle across lanes and to the rear
    vehicle within a lane.
    """
    out = []
    vs = scene.vehicles
    for i in range(len(vs)):
        for j in range(i + 1, len(vs)):
            a, b = vs[i], vs[j]
            if a.kind != b.kind:
                m = a if a.kind == "merge" else b
                if not (m.pos > GOAL):
                    continue  # still on the ramp: different lanes
            if not _bodies_overlap(a, b):
                continue
            out.append((a.vid, b.vid, _fault_of(scene, a, b)))
    return out


def _fault_of(scene: Scene, a: Vehicle, b: Vehicle) -> int:
    cross_pair = a.kind != b.kind
    if cross_pair:
        m = a if a.kind == "merge" else b
        if scene.crossed_front_step.get(m.vid) == scene.step_count:
            return m.vid  # inserted into an occupied interval as the gate opened
    a_in = b.rear < a.pos <= b.pos  # a's front bumper inside b's body
    b_in = a.rear < b.pos <= a.pos
    if a_in != b_in:
        return a.vid if a_in else b.vid
    if cross_pair:
        return (a if a.kind == "merge" else b).vid
    # same lane, mutual: rear vehicle at fault; vid breaks exact ties
    return min((a.pos, a.vid), (b.pos, b.vid))[1]


def step_scene(scene: Scene, actions: dict) -> list:
    """Advance one step under per-vehicle accelerations; returns events.

    ``actions`` maps vid -> m/s^2 and must cover every vehicle. Mutates the
    scene. Stepping a terminal scene is a contract violation.
    """
    if scene.status != "running":
        raise RuntimeError(f"cannot step a terminal scene (status={scene.status})")
    for v in scene.vehicles:
        if v.vid not in actions:
            raise KeyError(f"no action for vehicle {v.vid}")

    p = scene.params
    ego_pre = scene.ego.pos
    traffic_pre_max = max((t.pos for t in scene.traffic_vehicles()), default=None)
    traffic_pre_min = min((t.pos for t in scene.traffic_vehicles()), default=None)
    pre_front = {v.vid: v.pos for v in scene.merge_vehicles()}

    for v in scene.vehicles:
        v.pos, v.vel = step_vehicle(v.pos, v.vel, actions[v.vid], p.dt,
                                    p.accel_min, p.accel_max)
    scene.step_count += 1

    events = []
    for v in scene.merge_vehicles():
        if pre_front[v.vid] <= GOAL < v.pos:
            scene.crossed_front_step[v.vid] = scene.step_count
            events.append(Event("crossed_goal", v.vid))

    pairs = detect_collisions(scene)
    if pairs:
        scene.status = "collision"
        parties = set()
        strikers = set()
        for va, vb, culprit in pairs:
            parties.update((va, vb))
            strikers.add(culprit)
            events.append(Event("collision", culprit, other=vb if culprit == va else va))
        for vid in parties:
            scene.fault[vid] = vid in strikers
        return events

    for v in scene.merge_vehicles():
        if v.vid not in scene.crossed_rear_step and v.rear > GOAL:
            scene.crossed_rear_step[v.vid] = scene.step_count
        done_at = scene.crossed_rear_step.get(v.vid)
        if (v.vid not in scene.completed and done_at is not None
                and scene.step_count - done_at >= p.settle_steps):
            scene.completed.add(v.vid)
            events.append(Event("completed", v.vid))

    if all(v.vid in scene.completed for v in scene.merge_vehicles()):
        scene.status = "success"
        return events

    events.extend(_regenerate(scene, ego_pre, traffic_pre_max, traffic_pre_min))

    if scene.step_count >= p.max_steps:
        scene.status = "timeout"
    return events


def _regenerate(scene: Scene, ego_pre, traffic_pre_max, traffic_pre_min) -> list:
    """Keep the traffic stream populated around the ego.

    three_vehicle: exactly two traffic vehicles exist. When the ego's front
    bumper moves ahead of the foremost (or falls behind the rearmost), the
    far-side vehicle is recycled to the vacated side at the stream TIV behind
    or ahead of the ego. Triggered on the order crossing only, so initial
    both-on-one-side configurations persist until the ego actually crosses.

    full_scene: traffic persists; a new vehicle spawns behind the last
    upstream traffic vehicle whenever no traffic is behind the ego, capped at
    traffic_count.
    """
    cfg = scene.cfg
    events = []
    traffic = scene.traffic_vehicles()
    if not traffic:
        return events
    ego = scene.ego
    stream_gap = cfg.tiv_stream * cfg.initial_speed

    if cfg.variant == "three_vehicle":
        now_max = max(t.pos for t in traffic)
        now_min = min(t.pos for t in traffic)
        if ego.pos > now_max and not ego_pre > traffic_pre_max:
            # ego passed the whole stream: recycle the rearmost to the front
            old = min(traffic, key=lambda t: (t.pos, t.vid))
            events.append(Event("despawn", old.vid))
            scene.vehicles.remove(old)
            nv = Vehicle(scene.next_vid, "traffic", "traffic",
                         ego.pos + stream_gap + cfg.traffic_length,
                         cfg.initial_speed, cfg.traffic_length, old.policy)
            scene.next_vid += 1
            scene.vehicles.append(nv)
            events.append(Event("spawn", nv.vid))
        elif ego.pos < now_min and not ego_pre < traffic_pre_min:
            old = max(traffic, key=lambda t: (t.pos, t.vid))
            events.append(Event("despawn", old.vid))
            scene.vehicles.remove(old)
            nv = Vehicle(scene.next_vid, "traffic", "traffic",
                         ego.rear - stream_gap, cfg.initial_speed,
                         cfg.traffic_length, old.policy)
            scene.next_vid += 1
            scene.vehicles.append(nv)
            events.append(Event("spawn", nv.vid))
    else:
        behind = any(t.pos <= ego.pos for t in traffic)
        if not behind and len(traffic) < cfg.traffic_count:
            last = min(traffic, key=lambda t: (t.pos, t.vid))
            nv = Vehicle(scene.next_vid, "traffic", "traffic",
                         last.rear - stream_gap, cfg.initial_speed,
                         cfg.traffic_length, last.policy)
            scene.next_vid += 1
            scene.vehicles.append(nv)
            events.append(Event("spawn", nv.vid))
    return events
