"""Versioned, checksummed learner checkpoints with byte-deterministic layout.

File layout (all little-endian):

    magic "MRGA" | version u32 | header_len u32 | header JSON (utf-8)
    | arrays back-to-back (float64/int64) | sha256 of everything above

The header is canonical JSON (sorted keys, no whitespace) and carries no
timestamps, so identical state serializes to identical bytes. The replay
buffer is deliberately not persisted; resuming continues with an empty
buffer and re-warms before updating.
"""

import hashlib
import json
import struct
from dataclasses import asdict, dataclass

import numpy as np

from . import nets
from .ddpg import DdpgHyper, Learner, noise_sigma

MAGIC = b"MRGA"
VERSION = 1

ARRAY_KEYS = (
    "actor",
    "critic",
    "actor_target",
    "critic_target",
    "actor_m",
    "actor_v",
    "critic_m",
    "critic_v",
    "adam_steps",
)


@dataclass
class CheckpointMeta:
    variant: str
    learner: str  # 'merge' | 'traffic'
    obs_dim: int
    episode: int
    global_step: int
    sigma: float
    seed: int
    config_hash: str


def checkpoint_name(variant: str, learner: str, episode: int) -> str:
    return f"{variant}_{learner}_{episode}.ckpt"


def save_checkpoint(path, meta: CheckpointMeta, arrays: dict) -> None:
    if set(arrays) != set(ARRAY_KEYS):
        raise ValueError(f"arrays must be exactly {ARRAY_KEYS}")
    header = dict(asdict(meta))
    header["arrays"] = {k: int(arrays[k].shape[0]) for k in ARRAY_KEYS}
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    out = bytearray()
    out += MAGIC
    out += struct.pack("<I", VERSION)
    out += struct.pack("<I", len(blob))
    out += blob
    for key in ARRAY_KEYS:
        arr = arrays[key]
        dtype = "<i8" if key == "adam_steps" else "<f8"
        out += np.ascontiguousarray(arr, dtype=dtype).tobytes()
    out += hashlib.sha256(out).digest()
    with open(path, "wb") as fh:
        fh.write(out)


def load_checkpoint(path):
    """Returns (CheckpointMeta, arrays dict); validates magic, version, checksum."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 44 or data[:4] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    body, digest = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ValueError(f"{path}: checksum mismatch (truncated or corrupted)")
    (version,) = struct.unpack_from("<I", body, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    (hlen,) = struct.unpack_from("<I", body, 8)
    header = json.loads(body[12 : 12 + hlen].decode())
    sizes = header.pop("arrays")
    meta = CheckpointMeta(**header)
    arrays = {}
    off = 12 + hlen
    for key in ARRAY_KEYS:
        n = sizes[key]
        dtype = "<i8" if key == "adam_steps" else "<f8"
        nbytes = n * 8
        arrays[key] = np.frombuffer(body, dtype=dtype, count=n, offset=off).copy()
        off += nbytes
    if off != len(body):
        raise ValueError(f"{path}: trailing bytes after arrays")
    _validate_dims(path, meta, arrays)
    return meta, arrays


def _validate_dims(path, meta: CheckpointMeta, arrays: dict) -> None:
    n_actor = nets.param_count(meta.obs_dim)
    n_critic = nets.param_count(meta.obs_dim + 1)
    expect = {
        "actor": n_actor, "actor_target": n_actor,
        "actor_m": n_actor, "actor_v": n_actor,
        "critic": n_critic, "critic_target": n_critic,
        "critic_m": n_critic, "critic_v": n_critic,
        "adam_steps": 2,
    }
    for key, n in expect.items():
        if arrays[key].shape[0] != n:
            raise ValueError(
                f"{path}: array {key!r} has {arrays[key].shape[0]} entries, "
                f"obs_dim {meta.obs_dim} requires {n}"
            )


def learner_arrays(lr: Learner) -> dict:
    return {
        "actor": lr.actor,
        "critic": lr.critic,
        "actor_target": lr.actor_target,
        "critic_target": lr.critic_target,
        "actor_m": lr.actor_m,
        "actor_v": lr.actor_v,
        "critic_m": lr.critic_m,
        "critic_v": lr.critic_v,
        "adam_steps": lr.adam_steps,
    }


def save_learner(path, lr: Learner, variant: str, learner: str, episode: int,
                 global_step: int, seed: int, config_hash: str) -> CheckpointMeta:
    meta = CheckpointMeta(
        variant=variant, learner=learner, obs_dim=lr.obs_dim, episode=episode,
        global_step=global_step, sigma=noise_sigma(lr.hyper, global_step),
        seed=seed, config_hash=config_hash,
    )
    save_checkpoint(path, meta, learner_arrays(lr))
    return meta


def restore_learner(path, hyper: DdpgHyper, expect_obs_dim: int | None = None):
    """Rebuild a Learner from a checkpoint (fresh, empty replay buffer)."""
    meta, arrays = load_checkpoint(path)
    if expect_obs_dim is not None and meta.obs_dim != expect_obs_dim:
        raise ValueError(
            f"{path}: checkpoint observation dimension {meta.obs_dim} "
            f"does not match expected {expect_obs_dim}"
        )
    lr = Learner(meta.obs_dim, hyper, np.random.default_rng(0))
    lr.actor[:] = arrays["actor"]
    lr.critic[:] = arrays["critic"]
    lr.actor_target[:] = arrays["actor_target"]
    lr.critic_target[:] = arrays["critic_target"]
    lr.actor_m[:] = arrays["actor_m"]
    lr.actor_v[:] = arrays["actor_v"]
    lr.critic_m[:] = arrays["critic_m"]
    lr.critic_v[:] = arrays["critic_v"]
    lr.adam_steps[:] = arrays["adam_steps"]
    lr.update_count = int(lr.adam_steps[0])
    return lr, meta


def load_actor(path, expect_obs_dim: int | None = None):
    """Actor weights only (evaluation path); enforces the dimension contract."""
    meta, arrays = load_checkpoint(path)
    if expect_obs_dim is not None and meta.obs_dim != expect_obs_dim:
        raise ValueError(
            f"{path}: checkpoint observation dimension {meta.obs_dim} "
            f"does not match expected {expect_obs_dim}"
        )
    return arrays["actor"], meta
