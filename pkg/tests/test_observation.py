"""Observation vectors: dimensions, feature order, clipping, phantoms."""

import math

import numpy as np
import pytest

from merge_arena import observation as obs_mod
from merge_arena.observation import (
    MERGE_DIM,
    TRAFFIC_DIM,
    feature_names,
    merge_observation,
    observe,
    tiv,
    traffic_observation,
)
from merge_arena.scene import Scene, SceneConfig, SimParams, Vehicle, init_episode, step_scene


def make_scene(vehicles, variant="three_vehicle", **cfg_kw):
    cfg = SceneConfig(variant=variant, **cfg_kw)
    return Scene(params=SimParams(), cfg=cfg, vehicles=vehicles,
                 next_vid=max(v.vid for v in vehicles) + 1)


def veh(vid, kind, pos, vel=30.0, length=5.0, role=None):
    if role is None:
        role = "ego" if kind == "merge" else "traffic"
    return Vehicle(vid, kind, role, pos, vel, length,
                   "net" if kind == "merge" else "constant")


def reference_scene():
    return init_episode(SceneConfig(
        variant="three_vehicle", ramp_length=150.0, start_differential=-15.0,
        traffic_gap=30.0, initial_speed=30.0))


class TestDimensions:
    def test_vector_lengths(self):
        s3 = reference_scene()
        assert observe(s3, 0).shape == (6,)
        assert observe(s3, 1).shape == (5,)
        fs = init_episode(SceneConfig(variant="full_scene", ramp_length=150.0,
                                      start_differential=-15.0, traffic_gap=30.0))
        for m in fs.merge_vehicles():
            assert observe(fs, m.vid).shape == (7,)
        for t in fs.traffic_vehicles():
            assert observe(fs, t.vid).shape == (8,)

    def test_feature_names_match_dims(self):
        for variant in ("three_vehicle", "full_scene"):
            assert len(feature_names(variant, "merge")) == MERGE_DIM[variant]
            assert len(feature_names(variant, "traffic")) == TRAFFIC_DIM[variant]

    def test_kind_mismatch_raises(self):
        s = reference_scene()
        with pytest.raises(ValueError):
            merge_observation(s, 1)
        with pytest.raises(ValueError):
            traffic_observation(s, 0)


class TestMergeObservation:
    def test_reference_geometry_vector(self):
        # 150 m ramp, rear tracked 15 m behind, 30 m gap, common speed 30:
        # every feature lands exactly on the grid values
        s = reference_scene()
        assert observe(s, 0).tolist() == [10.0, 0.0, 15.0, 0.0, 150.0, 30.0]

    def test_front_gap_clips_50_to_30(self):
        s = init_episode(SceneConfig(
            variant="three_vehicle", ramp_length=150.0, start_differential=-105.0,
            traffic_gap=45.0, initial_speed=30.0))
        # front tracked at -205 + 45 + 5 = -155, gap = -160 - (-150) ... use rear slot:
        # rear gap = ego.rear - rear.pos = -155 + 205 = 50
        raw = merge_observation(s, 0, raw=True)
        clipped = observe(s, 0)
        assert raw[0] == 50.0
        assert clipped[0] == 30.0

    def test_negative_gap_clips_at_minus_2_5(self):
        s = make_scene([veh(0, "merge", -150.0), veh(1, "traffic", -151.0),
                        veh(2, "traffic", -100.0)])
        raw = merge_observation(s, 0, raw=True)
        assert raw[0] == -155.0 - (-151.0)
        assert observe(s, 0)[0] == -2.5

    def test_closing_speed_signs(self):
        # rear traffic faster -> closing from behind positive;
        # front traffic slower -> closing from ahead positive
        s = make_scene([veh(0, "merge", -150.0, vel=30.0),
                        veh(1, "traffic", -165.0, vel=34.0),
                        veh(2, "traffic", -130.0, vel=27.0)])
        o = observe(s, 0)
        assert o[1] == 4.0
        assert o[3] == 3.0

    def test_closing_speed_clips(self):
        s = make_scene([veh(0, "merge", -150.0, vel=30.0),
                        veh(1, "traffic", -165.0, vel=55.0),
                        veh(2, "traffic", -130.0, vel=0.0)])
        o = observe(s, 0)
        assert o[1] == 10.0  # raw +25
        assert o[3] == 10.0  # raw +30

    def test_goal_features(self):
        s = make_scene([veh(0, "merge", 20.0, vel=45.0),
                        veh(1, "traffic", -165.0), veh(2, "traffic", 60.0)])
        o = observe(s, 0)
        assert o[4] == -20.0  # past the goal: negative distance-to-go
        assert o[5] == 40.0   # speed clip
        far = make_scene([veh(0, "merge", -200.0), veh(1, "traffic", -265.0),
                          veh(2, "traffic", -230.0)])
        assert observe(far, 0)[4] == 150.0

    def test_traffic_exactly_at_ego_counts_as_rear(self):
        s = make_scene([veh(0, "merge", -150.0), veh(1, "traffic", -150.0),
                        veh(2, "traffic", -100.0)])
        raw = merge_observation(s, 0, raw=True)
        assert raw[0] == -5.0   # rear slot: body overlap with the tie
        assert raw[2] == 45.0   # front slot picks the far vehicle
        assert raw[2] == (-100.0 - 5.0) - (-150.0)

    def test_full_scene_lead_tiv(self):
        fs = init_episode(SceneConfig(variant="full_scene", ramp_length=150.0,
                                      start_differential=-15.0, traffic_gap=30.0,
                                      initial_speed=30.0, lead_merge_offset=20.0))
        ego = fs.ego
        lead = next(m for m in fs.merge_vehicles() if m.vid != ego.vid)
        o = observe(fs, ego.vid)
        assert o[6] == (lead.rear - ego.pos) / ego.vel  # 15/30
        assert o[6] == 0.5
        # the lead itself has no merge vehicle ahead: phantom 100 m pre-clip
        raw = merge_observation(fs, lead.vid, raw=True)
        assert raw[6] == pytest.approx(100.0 / 30.0)
        assert observe(fs, lead.vid)[6] == 2.5


class TestTrafficObservation:
    def test_reference_vectors(self):
        s = reference_scene()
        # rear tracked: 10 m body gap, same speed, stream TIV 30/30, far from
        # goal (clip 3), behind the ego
        assert observe(s, 1).tolist() == [10.0, 0.0, 1.0, 3.0, -1.0]
        # front tracked: 15 m gap, no one ahead (phantom -> TIV clips high), ahead
        assert observe(s, 2).tolist() == [15.0, 0.0, 2.5, 3.0, 1.0]

    def test_signed_gap_is_symmetric_body_distance(self):
        # traffic behind the ego and traffic ahead both report positive gaps
        s = make_scene([veh(0, "merge", -150.0),
                        veh(1, "traffic", -162.0), veh(2, "traffic", -137.0)])
        assert observe(s, 1)[0] == -155.0 - (-162.0)  # ego.rear - me.pos = 7
        assert observe(s, 2)[0] == -142.0 - (-150.0)  # me.rear - ego.pos = 8

    def test_overlap_reads_negative_gap(self):
        s = make_scene([veh(0, "merge", -150.0), veh(1, "traffic", -148.0),
                        veh(2, "traffic", -100.0)])
        raw = traffic_observation(s, 1, raw=True)
        assert raw[0] == max(-155.0 + 148.0, -153.0 + 150.0) == -3.0
        assert observe(s, 1)[0] == -2.5

    def test_closing_sign_by_relative_order(self):
        # ego ahead, traffic faster: closing positive for the chaser
        s = make_scene([veh(0, "merge", -150.0, vel=28.0),
                        veh(1, "traffic", -170.0, vel=33.0),
                        veh(2, "traffic", -120.0, vel=25.0)])
        assert observe(s, 1)[1] == 5.0   # me.vel - ego.vel
        assert observe(s, 2)[1] == 3.0   # ego.vel - me.vel

    def test_prox_sign(self):
        s = reference_scene()
        assert observe(s, 1)[4] == -1.0
        assert observe(s, 2)[4] == 1.0

    def test_crossed_merge_becomes_lane_front(self):
        # ego merged between the two traffic vehicles: the rear one now
        # follows the ego, not the far traffic vehicle
        s = make_scene([veh(0, "merge", 10.0), veh(1, "traffic", 2.0),
                        veh(2, "traffic", 30.0)])
        o = observe(s, 1)
        assert o[2] == (10.0 - 5.0 - 2.0) / 30.0  # TIV to the ego's rear bumper
        assert o[2] == pytest.approx(0.1)

    def test_tiv_ignores_merge_still_on_ramp(self):
        s = make_scene([veh(0, "merge", -0.5), veh(1, "traffic", -2.0),
                        veh(2, "traffic", 30.0)])
        o = observe(s, 1)
        assert o[2] == ((30.0 - 5.0) - (-2.0)) / 30.0  # 27/30, phantom-free

    def test_stopped_vehicle_tiv_and_ttg_saturate(self):
        s = make_scene([veh(0, "merge", -150.0), veh(1, "traffic", -165.0, vel=0.0),
                        veh(2, "traffic", -130.0)])
        o = observe(s, 1)
        assert o[2] == 2.5 and o[3] == 3.0
        raw = traffic_observation(s, 1, raw=True)
        assert math.isinf(raw[2]) and math.isinf(raw[3])

    def test_time_to_goal_in_range(self):
        s = make_scene([veh(0, "merge", -150.0), veh(1, "traffic", -45.0),
                        veh(2, "traffic", -10.0)])
        assert observe(s, 1)[3] == 45.0 / 30.0
        assert observe(s, 2)[3] == 10.0 / 30.0

    def test_full_scene_slots_and_phantoms(self):
        fs = init_episode(SceneConfig(variant="full_scene", ramp_length=150.0,
                                      start_differential=-15.0, traffic_gap=30.0,
                                      initial_speed=30.0))
        rearmost = min(fs.traffic_vehicles(), key=lambda t: t.pos)
        o = observe(fs, rearmost.vid)
        raw = traffic_observation(fs, rearmost.vid, raw=True)
        # no merge vehicle behind the rearmost filler: phantom rear slot
        assert raw[0] == 100.0 and raw[1] == 0.0
        assert o[0] == 30.0 and o[1] == 0.0
        assert o[7] == -1.0  # phantom rear -> proximity flag down
        # nearest merge ahead is the ego at -150
        ego = fs.ego
        assert raw[2] == ego.rear - rearmost.pos
        assert o[6] == 1.0

        foremost = max(fs.traffic_vehicles(), key=lambda t: t.pos)
        o2 = observe(fs, foremost.vid)
        raw2 = traffic_observation(fs, foremost.vid, raw=True)
        assert raw2[2] == 100.0 and o2[2] == 30.0
        assert o2[6] == -1.0 and o2[7] == 1.0

    def test_full_scene_closing_signs(self):
        # traffic vehicle strictly between the two merge vehicles
        s = make_scene([veh(0, "merge", -150.0, vel=33.0),
                        veh(1, "merge", -120.0, vel=26.0, role="front_merge"),
                        veh(2, "traffic", -135.0, vel=30.0),
                        veh(3, "traffic", -60.0)], variant="full_scene")
        o = observe(s, 2)
        assert o[1] == 3.0   # rear merge closing on me
        assert o[3] == 4.0   # me closing on front merge
        assert o[6] == 1.0 and o[7] == 1.0

    def test_merge_exactly_at_traffic_counts_as_rear_slot(self):
        # exact position tie resolves to the rear slot, front goes phantom
        s = make_scene([veh(0, "merge", -150.0),
                        veh(1, "merge", -130.0, vel=26.0, role="front_merge"),
                        veh(2, "traffic", -130.0),
                        veh(3, "traffic", -60.0)], variant="full_scene")
        raw = traffic_observation(s, 2, raw=True)
        assert raw[0] == -5.0 and raw[1] == 26.0 - 30.0
        assert raw[2] == 100.0 and raw[3] == 0.0


def test_tiv_helper():
    assert tiv(24.0, 30.0) == 0.8
    assert tiv(100.0, 30.0) == 2.5
    assert tiv(-3.0, 30.0) == 0.0
    assert tiv(10.0, 0.0) == 2.5
    assert tiv(10.0, -1.0) == 2.5


def test_all_features_respect_declared_ranges():
    rng = np.random.default_rng(42)
    checked = 0
    for _ in range(60):
        variant = "three_vehicle" if rng.random() < 0.5 else "full_scene"
        cfg = SceneConfig(
            variant=variant,
            ramp_length=float(rng.uniform(40.0, 260.0)),
            start_differential=float(rng.uniform(-20.0, 20.0)),
            traffic_gap=float(rng.uniform(3.0, 100.0)),
            initial_speed=float(rng.uniform(20.0, 35.0)),
            traffic_length=float(rng.uniform(4.0, 20.0)),
            tiv_stream=float(rng.uniform(0.5, 2.5)),
        )
        try:
            s = init_episode(cfg)
        except ValueError:
            continue
        for _ in range(10):
            if s.status != "running":
                break
            for v in s.vehicles:
                o = observe(s, v.vid)
                checked += 1
                if v.kind == "merge":
                    gaps, closings = o[[0, 2]], o[[1, 3]]
                    assert np.all((gaps >= -2.5) & (gaps <= 30.0))
                    assert np.all((closings >= -10.0) & (closings <= 10.0))
                    assert -160.0 <= o[4] <= 150.0
                    assert 0.0 <= o[5] <= 40.0
                    if variant == "full_scene":
                        assert 0.0 <= o[6] <= 2.5
                elif variant == "three_vehicle":
                    assert -2.5 <= o[0] <= 30.0
                    assert -10.0 <= o[1] <= 10.0
                    assert 0.0 <= o[2] <= 2.5
                    assert 0.0 <= o[3] <= 3.0
                    assert o[4] in (-1.0, 1.0)
                else:
                    assert np.all((o[[0, 2]] >= -2.5) & (o[[0, 2]] <= 30.0))
                    assert np.all((o[[1, 3]] >= -10.0) & (o[[1, 3]] <= 10.0))
                    assert 0.0 <= o[4] <= 2.5
                    assert 0.0 <= o[5] <= 3.0
                    assert o[6] in (-1.0, 1.0) and o[7] in (-1.0, 1.0)
            step_scene(s, {v.vid: float(rng.uniform(-5.0, 4.0)) for v in s.vehicles})
    assert checked > 1000
