"""Kinematics, episode lifecycle, collision/fault rules, regeneration."""

import pytest

from merge_arena.scene import (
    GOAL,
    Scene,
    SceneConfig,
    SimParams,
    Vehicle,
    detect_collisions,
    init_episode,
    step_scene,
    step_vehicle,
)


def make_scene(vehicles, variant="three_vehicle", params=None, cfg=None, **cfg_kw):
    cfg = cfg or SceneConfig(variant=variant, **cfg_kw)
    return Scene(params=params or SimParams(), cfg=cfg, vehicles=vehicles,
                 next_vid=max((v.vid for v in vehicles), default=-1) + 1)


def veh(vid, kind, pos, vel=30.0, length=5.0, role=None, policy="constant"):
    if role is None:
        role = "ego" if kind == "merge" else "traffic"
    if kind == "merge":
        policy = "net"
    return Vehicle(vid, kind, role, pos, vel, length, policy)


class TestStepVehicle:
    def test_exact_constant_accel_update(self):
        pos, vel = step_vehicle(0.0, 30.0, 2.0, 0.1)
        assert vel == 30.0 + 2.0 * 0.1
        assert pos == 30.0 * 0.1 + 0.5 * 2.0 * 0.1 * 0.1

    def test_zero_accel_holds_speed(self):
        pos, vel = step_vehicle(-150.0, 30.0, 0.0, 0.1)
        assert vel == 30.0
        assert pos == -150.0 + 30.0 * 0.1

    def test_accel_clipped_to_range(self):
        assert step_vehicle(0.0, 30.0, 100.0, 0.1) == step_vehicle(0.0, 30.0, 4.0, 0.1)
        assert step_vehicle(0.0, 30.0, -100.0, 0.1) == step_vehicle(0.0, 30.0, -5.0, 0.1)

    def test_velocity_floor_partial_advance(self):
        # would cross zero mid-step: advance the stopping distance, halt
        pos, vel = step_vehicle(10.0, 0.4, -5.0, 0.1)
        assert vel == 0.0
        assert pos == 10.0 + 0.4 * 0.4 / (2.0 * 5.0)

    def test_stopped_vehicle_braking_stays_put(self):
        pos, vel = step_vehicle(7.0, 0.0, -5.0, 0.1)
        assert (pos, vel) == (7.0, 0.0)

    def test_stop_exactly_at_zero_velocity(self):
        # vel + a*dt == 0 exactly: the quadratic update already lands the
        # stopping distance, no special casing
        pos, vel = step_vehicle(0.0, 0.5, -5.0, 0.1)
        assert vel == 0.0
        assert pos == pytest.approx(0.5 * 0.5 / 10.0, abs=1e-15)

    def test_rejects_nonpositive_dt(self):
        with pytest.raises(ValueError):
            step_vehicle(0.0, 30.0, 0.0, 0.0)


class TestInitGeometry:
    def test_three_vehicle_layout(self):
        cfg = SceneConfig(variant="three_vehicle", ramp_length=150.0,
                          start_differential=-15.0, traffic_gap=30.0,
                          initial_speed=30.0)
        s = init_episode(cfg)
        ego = s.ego
        assert ego.pos == -150.0 and ego.vel == 30.0 and ego.length == 5.0
        rear, front = sorted(s.traffic_vehicles(), key=lambda v: v.pos)
        assert rear.pos == -165.0
        assert front.pos == rear.pos + 30.0 + front.length == -130.0
        assert all(v.vel == 30.0 for v in s.vehicles)
        assert len(s.vehicles) == 3

    def test_positive_differential_puts_rear_tracked_ahead(self):
        cfg = SceneConfig(variant="three_vehicle", ramp_length=100.0,
                          start_differential=12.0, traffic_gap=15.0)
        s = init_episode(cfg)
        lo, hi = sorted(t.pos for t in s.traffic_vehicles())
        assert lo == -88.0 and hi == -68.0

    def test_full_scene_layout(self):
        cfg = SceneConfig(variant="full_scene", ramp_length=150.0,
                          start_differential=-15.0, traffic_gap=30.0,
                          initial_speed=30.0, tiv_stream=0.8)
        s = init_episode(cfg)
        merges = sorted(s.merge_vehicles(), key=lambda v: v.pos)
        assert [m.pos for m in merges] == [-150.0, -130.0]
        assert merges[1].role == "front_merge"
        stream = 0.8 * 30.0
        traffic = sorted(s.traffic_vehicles(), key=lambda v: v.pos)
        assert [t.pos for t in traffic] == [
            -165.0 - 5.0 - stream,   # upstream filler behind the rear tracked
            -165.0,
            -130.0,
            -130.0 + stream + 5.0,   # downstream filler ahead of the front tracked
        ]

    def test_traffic_policies_cycle(self):
        cfg = SceneConfig(variant="full_scene", traffic_gap=30.0,
                          traffic_policies=("constant", "random"))
        s = init_episode(cfg)
        by_vid = sorted(s.traffic_vehicles(), key=lambda v: v.vid)
        assert [t.policy for t in by_vid] == ["constant", "random", "constant", "random"]

    def test_rejects_same_lane_overlap(self):
        with pytest.raises(ValueError):
            init_episode(SceneConfig(variant="three_vehicle", traffic_gap=-6.0))
        with pytest.raises(ValueError):
            init_episode(SceneConfig(variant="full_scene", traffic_gap=30.0,
                                     lead_merge_offset=3.0))

    def test_allows_cross_lane_coincidence(self):
        # lead merge exactly on top of the front tracked traffic: legal at
        # t=0, they are in different lanes until the merge crosses the goal
        cfg = SceneConfig(variant="full_scene", ramp_length=150.0,
                          start_differential=-15.0, traffic_gap=30.0,
                          lead_merge_offset=20.0)
        s = init_episode(cfg)
        assert any(t.pos == -130.0 for t in s.traffic_vehicles())
        assert any(m.pos == -130.0 for m in s.merge_vehicles())

    def test_touching_bumpers_legal_at_init(self):
        # gap exactly zero is contact, not overlap
        cfg = SceneConfig(variant="three_vehicle", traffic_gap=0.0)
        s = init_episode(cfg)
        rear, front = sorted(s.traffic_vehicles(), key=lambda v: v.pos)
        assert front.rear == rear.pos

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SceneConfig(variant="sideways")
        with pytest.raises(ValueError):
            SceneConfig(ramp_length=0.0)
        with pytest.raises(ValueError):
            SimParams(dt=-0.1)


class TestCollisions:
    def test_touching_is_not_collision(self):
        s = make_scene([veh(0, "traffic", 10.0), veh(1, "traffic", 15.0)])
        assert detect_collisions(s) == []

    def test_tiny_overlap_is_collision(self):
        s = make_scene([veh(0, "traffic", 10.0), veh(1, "traffic", 15.0 - 1e-9)])
        assert len(detect_collisions(s)) == 1

    def test_merge_on_ramp_never_hits_traffic(self):
        # fully overlapping bodies, merge still at or before the goal line
        for pos in (-20.0, 0.0):
            s = make_scene([veh(0, "merge", pos), veh(1, "traffic", pos)])
            assert detect_collisions(s) == []

    def test_merge_past_goal_hits_traffic(self):
        s = make_scene([veh(0, "merge", 1e-9), veh(1, "traffic", 1e-9)])
        assert len(detect_collisions(s)) == 1

    def test_rear_striker_at_fault(self):
        # vehicle 1's front bumper sits inside vehicle 0's body
        s = make_scene([veh(0, "traffic", 10.0), veh(1, "traffic", 5.5)])
        [(a, b, fault)] = detect_collisions(s)
        assert {a, b} == {0, 1} and fault == 1

    def test_mutual_same_lane_tie_goes_to_lower_vid(self):
        s = make_scene([veh(0, "traffic", 10.0), veh(1, "traffic", 10.0)])
        [(_, _, fault)] = detect_collisions(s)
        assert fault == 0

    def test_mutual_cross_lane_blames_merge(self):
        s = make_scene([veh(0, "merge", 10.0), veh(1, "traffic", 10.0)])
        s.crossed_front_step[0] = 1
        s.step_count = 5
        [(_, _, fault)] = detect_collisions(s)
        assert fault == 0

    def test_insertion_on_crossing_step_blames_merge(self):
        # traffic is geometrically the striker (its front inside the merge
        # body) but the merge vehicle inserted itself this very step
        s = make_scene([veh(0, "merge", -0.5), veh(1, "traffic", 2.0, vel=0.0)])
        events = step_scene(s, {0: 0.0, 1: 0.0})
        kinds = [e.kind for e in events]
        assert kinds == ["crossed_goal", "collision"]
        assert s.status == "collision"
        assert s.fault == {0: True, 1: False}

    def test_established_merge_can_be_victim(self):
        # merge crossed long ago; traffic rams it from behind
        s = make_scene([veh(0, "merge", 10.0, vel=30.0), veh(1, "traffic", 5.5, vel=30.0)])
        s.crossed_front_step[0] = 3
        s.step_count = 50
        [(_, _, fault)] = detect_collisions(s)
        assert fault == 1

    def test_collision_freezes_scene(self):
        s = make_scene([veh(0, "traffic", 10.0), veh(1, "traffic", 5.5),
                        veh(2, "merge", -100.0)])
        step_scene(s, {0: 0.0, 1: 0.0, 2: 0.0})
        assert s.status == "collision"
        assert 2 not in s.fault  # bystander is not a collision party
        with pytest.raises(RuntimeError):
            step_scene(s, {0: 0.0, 1: 0.0, 2: 0.0})


class TestEpisodeLifecycle:
    def three_v(self, **kw):
        base = dict(variant="three_vehicle", ramp_length=150.0,
                    start_differential=-15.0, traffic_gap=30.0, initial_speed=30.0)
        base.update(kw)
        return init_episode(SceneConfig(**base))

    @staticmethod
    def run(s, accel=0.0):
        while s.status == "running":
            step_scene(s, {v.vid: accel if v.kind == "merge" else 0.0
                           for v in s.vehicles})
        return s

    def test_cruise_through_succeeds(self):
        s = self.run(self.three_v())
        assert s.status == "success"
        # goal at slightly past 50 s of travel, rear clear one step later,
        # settle window of 10 further steps
        assert s.crossed_front_step[0] == 51
        assert s.crossed_rear_step[0] == 52
        assert s.step_count == 62
        assert s.completed == {0}

    def test_missing_action_raises(self):
        s = self.three_v()
        with pytest.raises(KeyError):
            step_scene(s, {0: 0.0})

    def test_timeout_when_ego_stops_short(self):
        s = self.three_v()
        while s.status == "running":
            step_scene(s, {v.vid: -5.0 if v.kind == "merge" else 0.0
                           for v in s.vehicles})
        assert s.status == "timeout"
        assert s.step_count == 600
        assert s.ego.pos < GOAL

    def test_success_on_final_step_beats_timeout(self):
        # rear bumper clears the goal on step 590; the settle window ends
        # exactly on the last permissible step
        s = self.run(self.three_v(ramp_length=1764.9999, start_differential=3000.0))
        assert s.status == "success"
        assert s.step_count == 600

    def test_settle_window_one_step_too_late_times_out(self):
        s = self.run(self.three_v(ramp_length=1764.9999 + 3.0, start_differential=3000.0))
        assert s.status == "timeout"

    def test_time_property(self):
        s = self.three_v()
        step_scene(s, {v.vid: 0.0 for v in s.vehicles})
        assert s.t == pytest.approx(0.1)


class TestRegeneration:
    def test_three_v_recycles_rearmost_when_ego_passes_front(self):
        s = make_scene([veh(0, "merge", -100.0, vel=40.0),
                        veh(1, "traffic", -90.0, vel=0.0),
                        veh(2, "traffic", -80.0, vel=0.0)],
                       traffic_gap=30.0, initial_speed=30.0, tiv_stream=0.8)
        events = []
        for _ in range(6):
            events += step_scene(s, {v.vid: 0.0 for v in s.vehicles})
        # ego moved -100 -> -76, passing the foremost stopped vehicle at -80
        assert s.ego.pos == pytest.approx(-76.0)
        assert [e.kind for e in events] == ["despawn", "spawn"]
        despawn, spawn = events
        assert despawn.vid == 1  # rearmost recycled
        traffic = {t.vid: t for t in s.traffic_vehicles()}
        assert set(traffic) == {2, 3}
        nv = traffic[3]
        assert nv.pos == pytest.approx(s.ego.pos + 0.8 * 30.0 + 5.0)
        assert nv.vel == 30.0
        assert nv.policy == "constant"

    def test_three_v_recycles_foremost_when_ego_falls_behind(self):
        s = make_scene([veh(0, "merge", -100.0, vel=0.0),
                        veh(1, "traffic", -110.0, vel=30.0),
                        veh(2, "traffic", -105.0, vel=30.0)],
                       traffic_gap=30.0, initial_speed=30.0, tiv_stream=0.8)
        events = []
        for _ in range(4):
            events += step_scene(s, {v.vid: 0.0 for v in s.vehicles})
        assert [e.kind for e in events] == ["despawn", "spawn"]
        assert events[0].vid == 2  # foremost recycled
        nv = s.vehicle(3)
        assert nv.pos == pytest.approx(s.ego.rear - 0.8 * 30.0)

    def test_three_v_no_trigger_without_order_crossing(self):
        # both traffic vehicles start ahead; no regeneration until the ego
        # actually overtakes or is overtaken
        s = make_scene([veh(0, "merge", -100.0, vel=30.0),
                        veh(1, "traffic", -90.0, vel=30.0),
                        veh(2, "traffic", -70.0, vel=30.0)])
        for _ in range(20):
            events = step_scene(s, {v.vid: 0.0 for v in s.vehicles})
            assert events == []
        assert {t.vid for t in s.traffic_vehicles()} == {1, 2}

    def test_full_scene_spawns_upstream_no_despawn(self):
        cfg = SceneConfig(variant="full_scene", ramp_length=150.0,
                          start_differential=-15.0, traffic_gap=30.0,
                          initial_speed=30.0, tiv_stream=0.8)
        s = init_episode(cfg)
        s.ego.vel = 0.0
        for m in s.merge_vehicles():
            m.vel = 0.0  # hold the merge lane still, let traffic flow past
        events = []
        for _ in range(15):
            events += step_scene(s, {v.vid: 0.0 for v in s.vehicles})
        assert [e.kind for e in events] == ["spawn"]
        assert len(s.traffic_vehicles()) == 5
        last = min((t for t in s.traffic_vehicles() if t.vid != events[0].vid),
                   key=lambda t: t.pos)
        nv = s.vehicle(events[0].vid)
        assert nv.pos == pytest.approx(last.rear - 0.8 * 30.0)

    def test_full_scene_spawn_respects_cap(self):
        cfg = SceneConfig(variant="full_scene", ramp_length=150.0,
                          start_differential=-15.0, traffic_gap=30.0,
                          initial_speed=30.0, traffic_count=4)
        s = init_episode(cfg)
        s.ego.vel = 0.0
        for m in s.merge_vehicles():
            m.vel = 0.0
        for _ in range(30):
            events = step_scene(s, {v.vid: 0.0 for v in s.vehicles})
            assert all(e.kind not in ("spawn", "despawn") for e in events)
        assert len(s.traffic_vehicles()) == 4


def test_scene_copy_is_independent():
    s = init_episode(SceneConfig(variant="three_vehicle", traffic_gap=30.0))
    c = s.copy()
    c.vehicles[0].pos += 100.0
    c.fault[9] = True
    c.completed.add(9)
    assert s.vehicles[0].pos == -150.0
    assert s.fault == {} and s.completed == set()
