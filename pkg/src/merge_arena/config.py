"""Training configuration: defaults, INI parsing, canonical hashing.

The on-disk format is sectioned key/value text (configparser syntax). CLI
flags override parsed values; the canonical per-variant files under
``configs/`` hold the defaults spelled out.
"""

import configparser
import hashlib
import json
import os
from dataclasses import dataclass, field, fields

from .ddpg import DdpgHyper
from .reward import RewardSpec
from .scene import SimParams

DEFAULT_EPISODES = {"three_vehicle": 2_500_000, "full_scene": 10_000_000}

SWEEP_DECAYS = (0.9995, 0.99995, 0.999995)


@dataclass
class TrainConfig:
    variant: str = "three_vehicle"
    total_episodes: int = 0  # 0: use the variant default
    checkpoint_every: int = 25_000
    curve_log_every: int = 1_000
    seed: int = 0
    hyper: DdpgHyper = field(default_factory=DdpgHyper)
    reward: RewardSpec = field(default_factory=RewardSpec)
    sim: SimParams = field(default_factory=SimParams)
    # per-episode randomization ranges (training mode)
    ramp_range: tuple = (40.0, 260.0)
    diff_range: tuple = (-20.0, 20.0)
    speed_range: tuple = (20.0, 35.0)
    traffic_length_range: tuple = (4.0, 20.0)
    tiv_train_range: tuple = (0.5, 2.5)
    merge_length: float = 5.0
    traffic_count: int = 6
    lead_merge_offset: float = 20.0

    def __post_init__(self):
        if self.variant not in DEFAULT_EPISODES:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.total_episodes == 0:
            self.total_episodes = DEFAULT_EPISODES[self.variant]
        if self.total_episodes < 1:
            raise ValueError("total_episodes must be positive")
        if self.checkpoint_every < 1 or self.curve_log_every < 1:
            raise ValueError("cadences must be positive")
        if self.checkpoint_every % self.curve_log_every != 0:
            raise ValueError(
                "checkpoint_every must be a multiple of curve_log_every "
                f"({self.checkpoint_every} vs {self.curve_log_every})"
            )
        for name in ("ramp_range", "diff_range", "speed_range",
                     "traffic_length_range", "tiv_train_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} is inverted: ({lo}, {hi})")
        if self.speed_range[0] <= 0:
            raise ValueError("speeds must be positive")
        # the slowest vehicle on the longest ramp must fit the episode
        worst = 2.0 * self.ramp_range[1] / self.speed_range[0]
        horizon = self.sim.max_steps * self.sim.dt
        if horizon < worst:
            raise ValueError(
                f"episode horizon {horizon:.1f}s cannot cover the slowest "
                f"longest-ramp crossing ({worst:.1f}s)"
            )


def config_hash(cfg: TrainConfig) -> str:
    """Short stable digest of everything except the seed."""
    d = {}
    for f in fields(cfg):
        if f.name == "seed":
            continue
        v = getattr(cfg, f.name)
        if hasattr(v, "__dataclass_fields__"):
            v = {k: getattr(v, k) for k in v.__dataclass_fields__}
        elif isinstance(v, tuple):
            v = list(v)
        d[f.name] = v
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _pair(text):
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ValueError(f"expected 'lo, hi', got {text!r}")
    return float(parts[0]), float(parts[1])


def load_config(path) -> TrainConfig:
    if not os.path.exists(path):
        raise FileNotFoundError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    parser.read(path)
    kw = {}
    t = parser["train"] if parser.has_section("train") else {}
    if "variant" in t:
        kw["variant"] = t["variant"]
    for key in ("total_episodes", "checkpoint_every", "curve_log_every", "seed"):
        if key in t:
            kw[key] = int(t[key])

    if parser.has_section("ddpg"):
        d = parser["ddpg"]
        hk = {}
        for key in ("lr_actor", "lr_critic", "gamma", "tau",
                    "noise_sigma0", "noise_decay"):
            if key in d:
                hk[key] = float(d[key])
        for key in ("batch", "capacity"):
            if key in d:
                hk[key] = int(d[key])
        kw["hyper"] = DdpgHyper(**hk)

    if parser.has_section("reward"):
        r = parser["reward"]
        rk = {}
        for key in ("merge_success", "at_fault_collision", "no_fault_collision",
                    "action_penalty_scale", "reward_scale"):
            if key in r:
                rk[key] = float(r[key])
        kw["reward"] = RewardSpec(**rk)

    if parser.has_section("sim"):
        s = parser["sim"]
        sk = {}
        for key in ("dt", "settle_window"):
            if key in s:
                sk[key] = float(s[key])
        if "max_steps" in s:
            sk["max_steps"] = int(s["max_steps"])
        kw["sim"] = SimParams(**sk)

    if parser.has_section("scene"):
        sc = parser["scene"]
        for key in ("ramp_range", "diff_range", "speed_range",
                    "traffic_length_range", "tiv_train_range"):
            if key in sc:
                kw[key] = _pair(sc[key])
        if "merge_length" in sc:
            kw["merge_length"] = float(sc["merge_length"])
        if "traffic_count" in sc:
            kw["traffic_count"] = int(sc["traffic_count"])
        if "lead_merge_offset" in sc:
            kw["lead_merge_offset"] = float(sc["lead_merge_offset"])

    return TrainConfig(**kw)


def dump_config(cfg: TrainConfig) -> str:
    h, r, s = cfg.hyper, cfg.reward, cfg.sim
    lines = [
        "[train]",
        f"variant = {cfg.variant}",
        f"total_episodes = {cfg.total_episodes}",
        f"checkpoint_every = {cfg.checkpoint_every}",
        f"curve_log_every = {cfg.curve_log_every}",
        f"seed = {cfg.seed}",
        "",
        "[ddpg]",
        f"lr_actor = {h.lr_actor}",
        f"lr_critic = {h.lr_critic}",
        f"gamma = {h.gamma}",
        f"tau = {h.tau}",
        f"batch = {h.batch}",
        f"capacity = {h.capacity}",
        f"noise_sigma0 = {h.noise_sigma0}",
        f"noise_decay = {h.noise_decay}",
        "",
        "[reward]",
        f"merge_success = {r.merge_success}",
        f"at_fault_collision = {r.at_fault_collision}",
        f"no_fault_collision = {r.no_fault_collision}",
        f"action_penalty_scale = {r.action_penalty_scale}",
        f"reward_scale = {r.reward_scale}",
        "",
        "[sim]",
        f"dt = {s.dt}",
        f"max_steps = {s.max_steps}",
        f"settle_window = {s.settle_window}",
        "",
        "[scene]",
        f"ramp_range = {cfg.ramp_range[0]}, {cfg.ramp_range[1]}",
        f"diff_range = {cfg.diff_range[0]}, {cfg.diff_range[1]}",
        f"speed_range = {cfg.speed_range[0]}, {cfg.speed_range[1]}",
        f"traffic_length_range = {cfg.traffic_length_range[0]}, {cfg.traffic_length_range[1]}",
        f"tiv_train_range = {cfg.tiv_train_range[0]}, {cfg.tiv_train_range[1]}",
        f"merge_length = {cfg.merge_length}",
        f"traffic_count = {cfg.traffic_count}",
        f"lead_merge_offset = {cfg.lead_merge_offset}",
        "",
    ]
    return "\n".join(lines)
