"""Self-play training loops, curve statistics, checkpoint cadence.

One merge learner controls every merge-lane vehicle (the ego, plus the lead
merge vehicle in the full scene); one traffic learner drives every traffic
vehicle whose per-episode policy draw came up reactive. Both learners step
once per environment step; the traffic learner only in episodes that actually
contain a reactive vehicle. Exploration noise rides on every network action
during training and decays on a global step counter shared by both learners.
"""

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import nets
from .checkpoint import checkpoint_name, save_learner
from .config import TrainConfig, config_hash, dump_config
from .ddpg import Learner, explore
from .observation import MERGE_DIM, TRAFFIC_DIM, observe
from .policy import constant_policy, random_policy, sample_policy_assignment
from .reward import RewardSpec, step_reward, terminal_reward
from .scene import SceneConfig, SimParams, init_episode, step_scene


@dataclass
class EpisodeOutcome:
    status: str
    steps: int
    ego_reward: float
    traffic_reward: float | None  # representative reactive vehicle, if any
    ego_actions: np.ndarray
    global_step: int = 0


def sample_train_config(cfg: TrainConfig, rng: np.random.Generator) -> SceneConfig:
    """Randomized episode geometry for training mode."""
    traffic_n = 2 if cfg.variant == "three_vehicle" else 4
    policies = tuple(sample_policy_assignment(rng, traffic_n, mode="train"))
    speed = float(rng.uniform(*cfg.speed_range))
    tiv = float(rng.uniform(*cfg.tiv_train_range))  # one draw spaces everything
    return SceneConfig(
        variant=cfg.variant,
        ramp_length=float(rng.uniform(*cfg.ramp_range)),
        start_differential=float(rng.uniform(*cfg.diff_range)),
        traffic_gap=tiv * speed,
        initial_speed=speed,
        tiv_stream=tiv,
        merge_length=cfg.merge_length,
        traffic_length=float(rng.uniform(*cfg.traffic_length_range)),
        traffic_count=cfg.traffic_count,
        lead_merge_offset=cfg.lead_merge_offset,
        traffic_policies=policies,
    )


def run_training_episode(cfg: TrainConfig, scene_cfg: SceneConfig,
                         merge_lr: Learner, traffic_lr: Learner,
                         rng: np.random.Generator, global_step: int) -> EpisodeOutcome:
    s = init_episode(scene_cfg, cfg.sim)
    reactive = any(t.policy == "reactive" for t in s.traffic_vehicles())
    rep_vid = min((t.vid for t in s.traffic_vehicles() if t.policy == "reactive"),
                  default=None)
    ego_vid = s.ego.vid
    rewards = {}
    ego_actions = []

    while s.status == "running":
        obs = {}
        acts = {}
        for v in sorted(s.vehicles, key=lambda v: v.vid):
            if v.kind == "merge":
                o = observe(s, v.vid)
                a = explore(merge_lr.act(o), global_step, cfg.hyper, rng)
            elif v.policy == "constant":
                acts[v.vid] = constant_policy(s, v.vid)
                continue
            elif v.policy == "random":
                acts[v.vid] = random_policy(rng)
                continue
            else:
                o = observe(s, v.vid)
                a = explore(nets.actor_action(traffic_lr.actor, o),
                            global_step, cfg.hyper, rng)
            obs[v.vid] = o
            acts[v.vid] = a

        step_scene(s, acts)
        done = s.status != "running"
        ego_actions.append(acts[ego_vid])

        alive = {v.vid for v in s.vehicles}
        for vid, o in obs.items():
            if vid not in alive:
                continue  # recycled mid-step: no successor state to learn from
            r = step_reward(acts[vid], cfg.reward)
            if done:
                r += terminal_reward(s, vid, cfg.reward)
            rewards[vid] = rewards.get(vid, 0.0) + r
            learner = merge_lr if s.vehicle(vid).kind == "merge" else traffic_lr
            learner.push(o, acts[vid], r, observe(s, vid), done)

        merge_lr.update(rng)
        if reactive:
            traffic_lr.update(rng)
        global_step += 1

    return EpisodeOutcome(
        status=s.status,
        steps=s.step_count,
        ego_reward=rewards.get(ego_vid, 0.0),
        traffic_reward=None if rep_vid is None else rewards.get(rep_vid, 0.0),
        ego_actions=np.array(ego_actions, dtype=np.float64),
        global_step=global_step,
    )


def run_eval_episode(scene_cfg: SceneConfig, params: SimParams,
                     reward_spec: RewardSpec, merge_theta: np.ndarray,
                     traffic_theta: np.ndarray | None,
                     rng: np.random.Generator) -> EpisodeOutcome:
    """Deterministic-policy rollout: no noise, no pushes, no updates."""
    s = init_episode(scene_cfg, params)
    if traffic_theta is None and any(t.policy == "reactive"
                                     for t in s.traffic_vehicles()):
        raise ValueError("reactive traffic requires traffic actor weights")
    ego_vid = s.ego.vid
    ego_reward = 0.0
    ego_actions = []

    while s.status == "running":
        acts = {}
        for v in sorted(s.vehicles, key=lambda v: v.vid):
            if v.kind == "merge":
                acts[v.vid] = nets.actor_action(merge_theta, observe(s, v.vid))
            elif v.policy == "constant":
                acts[v.vid] = constant_policy(s, v.vid)
            elif v.policy == "random":
                acts[v.vid] = random_policy(rng)
            else:
                acts[v.vid] = nets.actor_action(traffic_theta, observe(s, v.vid))
        step_scene(s, acts)
        ego_actions.append(acts[ego_vid])
        ego_reward += step_reward(acts[ego_vid], reward_spec)
        if s.status != "running":
            ego_reward += terminal_reward(s, ego_vid, reward_spec)

    return EpisodeOutcome(
        status=s.status, steps=s.step_count, ego_reward=ego_reward,
        traffic_reward=None,
        ego_actions=np.array(ego_actions, dtype=np.float64),
    )


def curve_stats(rewards):
    """Cumulative averages and trailing moving means (window 10) of a series."""
    if not rewards:
        raise ValueError("empty reward series")
    out = []
    total = 0.0
    for i, r in enumerate(rewards):
        total += r
        window = rewards[max(0, i - 9) : i + 1]
        out.append((total / (i + 1), sum(window) / len(window)))
    return out


@dataclass
class TrainResult:
    episodes: int
    total_steps: int
    checkpoints: list = field(default_factory=list)  # (episode, merge_path, traffic_path)
    summaries: list = field(default_factory=list)
    curve_path: str = ""
    manifest_path: str = ""
    mean_steps_per_episode: float = 0.0
    status_counts: dict = field(default_factory=dict)


def train(cfg: TrainConfig, out_dir, episodes: int | None = None,
          eval_summaries: bool = True) -> TrainResult:
    """Full training run with checkpoint/summary/curve artifacts.

    ``episodes`` overrides cfg.total_episodes (desk-scale runs). Checkpoints
    land every cfg.checkpoint_every episodes plus once at the end when the
    total is not itself on the cadence.
    """
    os.makedirs(out_dir, exist_ok=True)
    total = cfg.total_episodes if episodes is None else episodes
    rng = np.random.default_rng(cfg.seed)
    merge_lr = Learner(MERGE_DIM[cfg.variant], cfg.hyper, rng)
    traffic_lr = Learner(TRAFFIC_DIM[cfg.variant], cfg.hyper, rng)
    chash = config_hash(cfg)
    result = TrainResult(episodes=total, total_steps=0)
    curve_rows = []  # (episode, learner, reward)
    merge_series = []
    traffic_series = []
    status_counts = {"success": 0, "collision": 0, "timeout": 0}
    global_step = 0

    def save_all(episode):
        paths = []
        for name, lr in (("merge", merge_lr), ("traffic", traffic_lr)):
            p = os.path.join(out_dir, checkpoint_name(cfg.variant, name, episode))
            save_learner(p, lr, cfg.variant, name, episode, global_step,
                         cfg.seed, chash)
            paths.append(p)
        result.checkpoints.append((episode, paths[0], paths[1]))
        if eval_summaries:
            from .evaluation import checkpoint_summary

            sp = os.path.join(out_dir, f"summary_{episode}.json")
            checkpoint_summary(cfg, episode, paths[0], paths[1], sp)
            result.summaries.append(sp)

    for ep in range(1, total + 1):
        scene_cfg = sample_train_config(cfg, rng)
        out = run_training_episode(cfg, scene_cfg, merge_lr, traffic_lr,
                                   rng, global_step)
        global_step = out.global_step
        result.total_steps += out.steps
        status_counts[out.status] += 1

        if ep % cfg.curve_log_every == 0:
            curve_rows.append((ep, "merge", out.ego_reward))
            merge_series.append(out.ego_reward)
            if out.traffic_reward is not None:
                curve_rows.append((ep, "traffic", out.traffic_reward))
                traffic_series.append(out.traffic_reward)
        if ep % cfg.checkpoint_every == 0:
            save_all(ep)

    if total % cfg.checkpoint_every != 0:
        save_all(total)

    stats = {"merge": curve_stats(merge_series) if merge_series else [],
             "traffic": curve_stats(traffic_series) if traffic_series else []}
    counters = {"merge": 0, "traffic": 0}
    curve_path = os.path.join(out_dir, "curves.csv")
    with open(curve_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "reward", "cum_avg", "moving_mean", "learner"])
        for ep, learner, reward in curve_rows:
            cum, mov = stats[learner][counters[learner]]
            counters[learner] += 1
            w.writerow([ep, repr(reward), repr(cum), repr(mov), learner])
    result.curve_path = curve_path

    result.mean_steps_per_episode = result.total_steps / total
    result.status_counts = status_counts

    manifest = {
        "config": dump_config(cfg),
        "config_hash": chash,
        "seed": cfg.seed,
        "episodes": total,
        "total_steps": result.total_steps,
        "global_step": global_step,
        "mean_steps_per_episode": result.mean_steps_per_episode,
        "status_counts": status_counts,
        "merge_updates": merge_lr.update_count,
        "traffic_updates": traffic_lr.update_count,
        "artifacts": sorted(
            [os.path.basename(p) for _, m, t in result.checkpoints for p in (m, t)]
            + [os.path.basename(p) for p in result.summaries]
            + ["curves.csv"]
        ),
    }
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    result.manifest_path = manifest_path
    return result
