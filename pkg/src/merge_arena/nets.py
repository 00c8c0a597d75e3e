"""Network parameter layout, initialization and convenience wrappers."""

import numpy as np

from . import kernels
from .kernels import ACTION_HI, ACTION_LO, H, param_count

__all__ = [
    "H",
    "ACTION_LO",
    "ACTION_HI",
    "param_count",
    "layer_slices",
    "init_params",
    "zero_params",
    "actor_action",
    "actor_actions",
    "critic_values",
]


def layer_slices(n_in: int) -> dict:
    """Slices of the flat parameter vector, keyed w1/b1/w2/b2/w3/b3."""
    o1 = n_in * H
    o2 = o1 + H
    o3 = o2 + H * H
    o4 = o3 + H
    o5 = o4 + H
    return {
        "w1": slice(0, o1),
        "b1": slice(o1, o2),
        "w2": slice(o2, o3),
        "b2": slice(o3, o4),
        "w3": slice(o4, o5),
        "b3": slice(o5, o5 + 1),
    }


def init_params(n_in: int, rng: np.random.Generator) -> np.ndarray:
    """Fresh flat parameter vector.

    Hidden layers draw uniformly from +-1/sqrt(fan_in); the output layer from
    +-3e-3 so initial outputs sit near zero.
    """
    s = layer_slices(n_in)
    theta = np.empty(param_count(n_in), dtype=np.float64)
    r1 = 1.0 / np.sqrt(n_in)
    theta[s["w1"]] = rng.uniform(-r1, r1, n_in * H)
    theta[s["b1"]] = rng.uniform(-r1, r1, H)
    r2 = 1.0 / np.sqrt(H)
    theta[s["w2"]] = rng.uniform(-r2, r2, H * H)
    theta[s["b2"]] = rng.uniform(-r2, r2, H)
    r3 = 3e-3
    theta[s["w3"]] = rng.uniform(-r3, r3, H)
    theta[s["b3"]] = rng.uniform(-r3, r3, 1)
    return theta


def zero_params(n_in: int) -> np.ndarray:
    """All-zero parameter vector (the untrained baseline controller)."""
    return np.zeros(param_count(n_in), dtype=np.float64)


def actor_action(theta: np.ndarray, obs: np.ndarray) -> float:
    """Deterministic action for a single observation vector."""
    n = obs.shape[0]
    return float(kernels.actor_act1(theta, obs, n))


def actor_actions(theta: np.ndarray, obs: np.ndarray) -> np.ndarray:
    """Deterministic actions for a batch of observations, shape (B,)."""
    return kernels.actor_actions(theta, obs, obs.shape[1])


def critic_values(theta: np.ndarray, obs: np.ndarray, act: np.ndarray) -> np.ndarray:
    """Q(s, a) for a batch, shape (B,)."""
    return kernels.critic_values(theta, obs, act, obs.shape[1])
