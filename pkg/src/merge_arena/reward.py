"""Per-step action penalties and once-per-episode terminal rewards."""

from dataclasses import dataclass

from .scene import Scene

MERGE_SUCCESS = 1e3
AT_FAULT_COLLISION = -1e5
NO_FAULT_COLLISION = -1e6


@dataclass
class RewardSpec:
    merge_success: float = MERGE_SUCCESS
    at_fault_collision: float = AT_FAULT_COLLISION
    no_fault_collision: float = NO_FAULT_COLLISION
    action_penalty_scale: float = 1.0
    # global multiplier; 1.0 matches the published magnitudes, smaller values
    # are available because 1e6-scale regression targets can destabilize the
    # critic (off by default)
    reward_scale: float = 1.0

    def __post_init__(self):
        ok = (
            abs(self.no_fault_collision) > abs(self.at_fault_collision)
            and abs(self.at_fault_collision) > self.merge_success > 0
        )
        if not ok:
            raise ValueError("reward magnitudes must order |no_fault| > |at_fault| > success > 0")


def step_reward(accel: float, spec: RewardSpec) -> float:
    """Every action costs its magnitude: -|a|, scaled."""
    return -abs(accel) * spec.action_penalty_scale * spec.reward_scale


def terminal_reward(scene: Scene, vid: int, spec: RewardSpec) -> float:
    """Terminal reward for one vehicle, valid only on a terminal scene.

    success: +1e3 to each merge vehicle that completed its merge; collision:
    -1e5 to each at-fault party and -1e6 to each not-at-fault party of the
    collision (others 0); timeout: 0 for everyone.
    """
    if scene.status == "running":
        raise ValueError("terminal_reward on a running episode")
    if scene.status == "success":
        v = scene.vehicle(vid)
        if v.kind == "merge" and vid in scene.completed:
            return spec.merge_success * spec.reward_scale
        return 0.0
    if scene.status == "collision":
        if vid in scene.fault:
            base = spec.at_fault_collision if scene.fault[vid] else spec.no_fault_collision
            return base * spec.reward_scale
        return 0.0
    return 0.0  # timeout
