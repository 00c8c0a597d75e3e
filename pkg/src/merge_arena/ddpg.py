"""From-scratch DDPG learner: replay ring buffer, exploration, fused updates.

One :class:`Learner` owns an actor, a critic, their target twins, Adam state
and a replay buffer. All parameters live in flat float64 vectors; the heavy
math happens in :mod:`merge_arena.kernels` under the selected backend.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels, nets


@dataclass
class DdpgHyper:
    lr_actor: float = 0.001
    lr_critic: float = 0.001
    gamma: float = 0.9
    batch: int = 32
    capacity: int = 10_000
    tau: float = 0.001
    noise_sigma0: float = 4.5
    noise_decay: float = 0.999995  # per-step multiplicative shrink

    def __post_init__(self):
        if not (0.0 < self.gamma < 1.0):
            raise ValueError("gamma must lie in (0, 1)")
        if not (0.0 < self.tau <= 1.0):
            raise ValueError("tau must lie in (0, 1]")
        if self.batch > self.capacity:
            raise ValueError("batch cannot exceed buffer capacity")


def noise_sigma(hyper: DdpgHyper, global_step: int) -> float:
    """Exploration scale sigma0 * decay^step (closed form, resume-safe)."""
    return hyper.noise_sigma0 * hyper.noise_decay**global_step


def explore(action: float, global_step: int, hyper: DdpgHyper,
            rng: np.random.Generator) -> float:
    """Gaussian-perturbed action, clipped back onto the legal range."""
    a = action + noise_sigma(hyper, global_step) * rng.standard_normal()
    return min(max(a, kernels.ACTION_LO), kernels.ACTION_HI)


class ReplayBuffer:
    """Preallocated ring buffer of transitions, uniform sampling with replacement."""

    def __init__(self, capacity: int, obs_dim: int):
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim), dtype=np.float64)
        self.act = np.zeros(capacity, dtype=np.float64)
        self.rew = np.zeros(capacity, dtype=np.float64)
        self.next_obs = np.zeros((capacity, obs_dim), dtype=np.float64)
        self.done = np.zeros(capacity, dtype=np.float64)
        self.ptr = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def push(self, obs, act, rew, next_obs, done) -> None:
        i = self.ptr
        self.obs[i] = obs
        self.act[i] = act
        self.rew[i] = rew
        self.next_obs[i] = next_obs
        self.done[i] = 1.0 if done else 0.0
        self.ptr = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch: int, rng: np.random.Generator):
        if self.size < batch:
            raise ValueError(f"buffer holds {self.size} < batch {batch}")
        idx = rng.integers(0, self.size, batch)
        return (
            self.obs[idx],
            self.act[idx],
            self.rew[idx],
            self.next_obs[idx],
            self.done[idx],
        )


class Learner:
    """Actor-critic pair with targets, Adam state, and a replay buffer."""

    def __init__(self, obs_dim: int, hyper: DdpgHyper, rng: np.random.Generator):
        self.obs_dim = obs_dim
        self.hyper = hyper
        self.actor = nets.init_params(obs_dim, rng)
        self.critic = nets.init_params(obs_dim + 1, rng)
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()
        self.actor_m = np.zeros_like(self.actor)
        self.actor_v = np.zeros_like(self.actor)
        self.critic_m = np.zeros_like(self.critic)
        self.critic_v = np.zeros_like(self.critic)
        self.adam_steps = np.zeros(2, dtype=np.int64)  # (actor, critic)
        self.buffer = ReplayBuffer(hyper.capacity, obs_dim)
        self.update_count = 0

    def act(self, obs: np.ndarray) -> float:
        return float(kernels.actor_act1(self.actor, obs, self.obs_dim))

    def push(self, obs, act, rew, next_obs, done) -> None:
        self.buffer.push(obs, act, rew, next_obs, done)

    def ready(self) -> bool:
        # warm up until one full batch exists; no updates before that
        return len(self.buffer) >= self.hyper.batch

    def update(self, rng: np.random.Generator):
        """One fused DDPG update on a fresh uniform batch.

        Returns (critic_loss, mean_q), or None while warming up.
        """
        if not self.ready():
            return None
        h = self.hyper
        obs, act, rew, next_obs, done = self.buffer.sample(h.batch, rng)
        closs, mean_q = kernels.ddpg_update(
            self.actor, self.actor_m, self.actor_v,
            self.critic, self.critic_m, self.critic_v,
            self.actor_target, self.critic_target,
            self.adam_steps,
            obs, act, rew, next_obs, done,
            self.obs_dim, h.gamma, h.tau, h.lr_actor, h.lr_critic,
        )
        if not (math.isfinite(closs) and math.isfinite(mean_q)):
            raise RuntimeError(
                f"non-finite update (critic_loss={closs}, mean_q={mean_q}) "
                f"at update {self.update_count + 1}; aborting run"
            )
        self.update_count += 1
        return closs, mean_q
