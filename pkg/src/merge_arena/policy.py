"""Traffic action policies and per-episode policy assignment.

Traffic vehicles run one of three policies, fixed for the episode: constant
(hold speed, emergency-brake on short headway), random (uniform acceleration
each step), or reactive (the trained traffic actor network). Merge-lane
vehicles are always network-controlled and are not assigned here.
"""

import numpy as np

from .kernels import ACTION_HI, ACTION_LO
from .observation import front_gap, lane_front_vehicle, traffic_observation
from .scene import Scene

POLICY_NAMES = ("constant", "random", "reactive")

TIV_BRAKE_THRESHOLD = 0.8  # seconds
BRAKE_ACCEL = -5.0


def constant_policy(scene: Scene, vid: int, threshold: float = TIV_BRAKE_THRESHOLD) -> float:
    """Hold speed unless the headway to the front in-lane vehicle drops.

    The time in-between vehicles is evaluated pre-clip for exactness: raw
    bumper-to-bumper gap over own speed, front vehicle including any merge
    vehicle that has entered the lane. Below the threshold: maximum braking.
    """
    me = scene.vehicle(vid)
    if me.kind != "traffic":
        raise ValueError(f"vehicle {vid} is not a traffic vehicle")
    front = lane_front_vehicle(scene, me)
    if front is None or me.vel <= 0.0:
        return 0.0
    if front_gap(me, front) / me.vel < threshold:
        return BRAKE_ACCEL
    return 0.0


def random_policy(rng: np.random.Generator) -> float:
    """Fresh uniform draw over the full acceleration range, every step."""
    return float(rng.uniform(ACTION_LO, ACTION_HI))


def reactive_policy(scene: Scene, vid: int, traffic_theta: np.ndarray) -> float:
    """Deterministic traffic-actor forward pass."""
    from . import nets

    obs = traffic_observation(scene, vid)
    expected = nets.param_count(obs.shape[0])
    if traffic_theta.shape[0] != expected:
        raise ValueError(
            f"traffic actor has {traffic_theta.shape[0]} parameters, "
            f"observation dimension {obs.shape[0]} needs {expected}"
        )
    return nets.actor_action(traffic_theta, obs)


def sample_policy_assignment(rng: np.random.Generator, n_traffic: int,
                             mode: str = "train", test_policy: str | None = None) -> list:
    """Per-episode traffic policy assignment.

    Training draws independently and uniformly per vehicle; testing assigns
    one common policy to every traffic vehicle.
    """
    if mode == "train":
        return [POLICY_NAMES[rng.integers(0, len(POLICY_NAMES))] for _ in range(n_traffic)]
    if test_policy not in POLICY_NAMES:
        raise ValueError(f"test policy must be one of {POLICY_NAMES}, got {test_policy!r}")
    return [test_policy] * n_traffic
