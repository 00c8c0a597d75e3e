"""Timing comparison of the two compute backends.

Runs itself once per MERGE_ARENA_BACKEND value in a subprocess (the flag is
read at import time) and reports per-kernel medians plus an end-to-end
training-episode figure.

    python3 benchmarks/bench_backends.py            # both backends
    python3 benchmarks/bench_backends.py --inner    # current backend only
"""

import argparse
import json
import os
import statistics
import subprocess
import sys
import time

import numpy as np


def _median_time(fn, repeat=200, warmup=20):
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def run_current_backend():
    from merge_arena import backend, kernels, nets
    from merge_arena.config import TrainConfig
    from merge_arena.ddpg import Learner
    from merge_arena.observation import MERGE_DIM, TRAFFIC_DIM
    from merge_arena.training import run_training_episode, sample_train_config

    n = MERGE_DIM["three_vehicle"]
    rng = np.random.default_rng(0)
    a_theta = nets.init_params(n, rng)
    c_theta = nets.init_params(n + 1, rng)
    obs1 = rng.standard_normal(n)
    obs = rng.standard_normal((32, n))
    act = rng.standard_normal(32)
    y = rng.standard_normal(32)
    grad_c = np.zeros_like(c_theta)
    grad_a = np.zeros_like(a_theta)

    timings = {
        "actor_forward_single": _median_time(
            lambda: kernels.actor_act1(a_theta, obs1, n), repeat=2000),
        "actor_forward_batch32": _median_time(
            lambda: kernels.actor_actions(a_theta, obs, n)),
        "critic_forward_batch32": _median_time(
            lambda: kernels.critic_values(c_theta, obs, act, n)),
        "critic_grad_batch32": _median_time(
            lambda: kernels.critic_grad(c_theta, obs, act, y, grad_c, n)),
        "actor_grad_batch32": _median_time(
            lambda: kernels.actor_grad(a_theta, c_theta, obs, grad_a, n)),
    }

    cfg = TrainConfig(seed=0)
    lrng = np.random.default_rng(0)
    merge_lr = Learner(MERGE_DIM[cfg.variant], cfg.hyper, lrng)
    traffic_lr = Learner(TRAFFIC_DIM[cfg.variant], cfg.hyper, lrng)
    for _ in range(40):  # fill buffers so updates run inside the timing loop
        sc = sample_train_config(cfg, lrng)
        run_training_episode(cfg, sc, merge_lr, traffic_lr, lrng, 0)

    batch_rng = np.random.default_rng(1)
    timings["learner_update"] = _median_time(
        lambda: merge_lr.update(batch_rng), repeat=500)

    ep_rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    n_ep, n_steps = 50, 0
    for _ in range(n_ep):
        sc = sample_train_config(cfg, ep_rng)
        out = run_training_episode(cfg, sc, merge_lr, traffic_lr, ep_rng, 10**9)
        n_steps += out.steps
    wall = time.perf_counter() - t0
    timings["training_episode"] = wall / n_ep
    timings["training_step"] = wall / n_steps

    return {"backend": backend.ACTIVE, "timings": timings}


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--inner", action="store_true",
                        help="benchmark only the backend already selected")
    args = parser.parse_args()

    if args.inner:
        print(json.dumps(run_current_backend()))
        return

    results = []
    for name in ("numpy", "numba"):
        env = dict(os.environ, MERGE_ARENA_BACKEND=name)
        proc = subprocess.run(
            [sys.executable, os.path.abspath(__file__), "--inner"],
            env=env, capture_output=True, text=True, check=True)
        results.append(json.loads(proc.stdout.splitlines()[-1]))

    keys = list(results[0]["timings"])
    width = max(len(k) for k in keys)
    header = f"{'kernel':<{width}}  " + "  ".join(
        f"{r['backend']:>12}" for r in results) + "  speedup"
    print(header)
    print("-" * len(header))
    for k in keys:
        times = [r["timings"][k] for r in results]
        ratio = times[0] / times[1] if times[1] else float("inf")
        cells = "  ".join(f"{t * 1e6:>10.1f}us" for t in times)
        print(f"{k:<{width}}  {cells}  {ratio:>6.1f}x")


if __name__ == "__main__":
    main()
