"""Hot numeric kernels: MLP forward/backward, Adam, fused actor-critic update.

Both networks are 2-hidden-layer MLPs, 30 units per hidden layer, relu
activations, float64 throughout. The actor ends in tanh mapped affinely onto
the acceleration range [-5, 4]; the critic takes the action as an extra input
column and ends linear. Parameters live in one flat vector per network so the
optimizer, target tracking and serialization stay trivial:

    [W1 (n_in x 30), b1 (30), W2 (30 x 30), b2 (30), W3 (30), b3 (1)]

with weight matrices stored input-major, so a forward pass is ``x @ W``.
Every function here is written in the numba-compatible subset of numpy and
compiled (or not) according to :mod:`merge_arena.backend`.
"""

import numpy as np

from .backend import jit

H = 30  # hidden width, both layers, both networks

ACTION_LO = -5.0
ACTION_HI = 4.0
# tanh output u in (-1,1) maps to a = ACT_SCALE*u + ACT_SHIFT covering [lo, hi]
ACT_SCALE = (ACTION_HI - ACTION_LO) / 2.0  # 4.5
ACT_SHIFT = (ACTION_HI + ACTION_LO) / 2.0  # -0.5

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def param_count(n_in: int) -> int:
    """Flat parameter vector length for an ``[n_in, 30, 30, 1]`` network."""
    return n_in * H + H + H * H + H + H + 1


@jit
def actor_units(theta, obs, n):
    """Batched actor forward pass, returns tanh output u in (-1, 1), shape (B,)."""
    o1 = n * H
    w1 = theta[:o1].reshape(n, H)
    b1 = theta[o1 : o1 + H]
    o2 = o1 + H
    w2 = theta[o2 : o2 + H * H].reshape(H, H)
    o3 = o2 + H * H
    b2 = theta[o3 : o3 + H]
    o4 = o3 + H
    w3 = theta[o4 : o4 + H]
    b3 = theta[o4 + H]
    h1 = np.maximum(np.dot(obs, w1) + b1, 0.0)
    h2 = np.maximum(np.dot(h1, w2) + b2, 0.0)
    return np.tanh(np.dot(h2, w3) + b3)


@jit
def actor_actions(theta, obs, n):
    """Batched actor forward pass mapped to accelerations, shape (B,)."""
    return ACT_SCALE * actor_units(theta, obs, n) + ACT_SHIFT


@jit
def actor_act1(theta, obs, n):
    """Single-observation actor action (hot path during rollouts)."""
    o1 = n * H
    w1 = theta[:o1].reshape(n, H)
    b1 = theta[o1 : o1 + H]
    o2 = o1 + H
    w2 = theta[o2 : o2 + H * H].reshape(H, H)
    o3 = o2 + H * H
    b2 = theta[o3 : o3 + H]
    o4 = o3 + H
    w3 = theta[o4 : o4 + H]
    b3 = theta[o4 + H]
    h1 = np.maximum(np.dot(obs, w1) + b1, 0.0)
    h2 = np.maximum(np.dot(h1, w2) + b2, 0.0)
    u = np.tanh(np.dot(h2, w3) + b3)
    return ACT_SCALE * u + ACT_SHIFT


@jit
def critic_values(theta, obs, act, n):
    """Batched critic forward pass Q(s, a), shape (B,).

    ``n`` is the observation width; the critic input width is n + 1 with the
    raw acceleration in the last column.
    """
    b = obs.shape[0]
    m = n + 1
    z = np.empty((b, m))
    z[:, :n] = obs
    z[:, n] = act
    o1 = m * H
    w1 = theta[:o1].reshape(m, H)
    b1 = theta[o1 : o1 + H]
    o2 = o1 + H
    w2 = theta[o2 : o2 + H * H].reshape(H, H)
    o3 = o2 + H * H
    b2 = theta[o3 : o3 + H]
    o4 = o3 + H
    w3 = theta[o4 : o4 + H]
    b3 = theta[o4 + H]
    h1 = np.maximum(np.dot(z, w1) + b1, 0.0)
    h2 = np.maximum(np.dot(h1, w2) + b2, 0.0)
    return np.dot(h2, w3) + b3


@jit
def critic_grad(theta, obs, act, y, grad, n):
    """Mean-squared-error critic loss and its gradient.

    loss = mean((Q(s,a) - y)^2); gradient w.r.t. theta written into ``grad``.
    Returns the loss.
    """
    b = obs.shape[0]
    m = n + 1
    z = np.empty((b, m))
    z[:, :n] = obs
    z[:, n] = act
    o1 = m * H
    w1 = theta[:o1].reshape(m, H)
    b1 = theta[o1 : o1 + H]
    o2 = o1 + H
    w2 = theta[o2 : o2 + H * H].reshape(H, H)
    o3 = o2 + H * H
    b2 = theta[o3 : o3 + H]
    o4 = o3 + H
    w3 = theta[o4 : o4 + H]
    b3 = theta[o4 + H]

    h1 = np.maximum(np.dot(z, w1) + b1, 0.0)
    h2 = np.maximum(np.dot(h1, w2) + b2, 0.0)
    q = np.dot(h2, w3) + b3

    e = q - y
    loss = np.mean(e * e)

    dq = (2.0 / b) * e                        # (B,)
    dw3 = np.dot(h2.T, dq)                    # (H,)
    db3 = np.sum(dq)
    dh2 = np.outer(dq, w3) * np.where(h2 > 0.0, 1.0, 0.0)
    dw2 = np.dot(h1.T, dh2)                   # (H, H)
    db2 = np.sum(dh2, axis=0)
    dh1 = np.dot(dh2, w2.T) * np.where(h1 > 0.0, 1.0, 0.0)
    dw1 = np.dot(z.T, dh1)                    # (m, H)
    db1 = np.sum(dh1, axis=0)

    grad[:o1] = dw1.ravel()
    grad[o1 : o1 + H] = db1
    grad[o2 : o2 + H * H] = dw2.ravel()
    grad[o3 : o3 + H] = db2
    grad[o4 : o4 + H] = dw3
    grad[o4 + H] = db3
    return loss


@jit
def actor_grad(a_theta, c_theta, obs, grad, n):
    """Gradient of -mean Q(s, mu(s)) w.r.t. actor parameters.

    The negation makes it a descent direction for Adam; the returned value is
    the (unnegated) mean Q, useful as a training diagnostic.
    """
    b = obs.shape[0]
    # actor forward, keeping activations
    o1 = n * H
    aw1 = a_theta[:o1].reshape(n, H)
    ab1 = a_theta[o1 : o1 + H]
    o2 = o1 + H
    aw2 = a_theta[o2 : o2 + H * H].reshape(H, H)
    o3 = o2 + H * H
    ab2 = a_theta[o3 : o3 + H]
    o4 = o3 + H
    aw3 = a_theta[o4 : o4 + H]
    ab3 = a_theta[o4 + H]
    h1 = np.maximum(np.dot(obs, aw1) + ab1, 0.0)
    h2 = np.maximum(np.dot(h1, aw2) + ab2, 0.0)
    u = np.tanh(np.dot(h2, aw3) + ab3)        # (B,)
    act = ACT_SCALE * u + ACT_SHIFT

    # critic forward on (obs, act), keeping activations
    m = n + 1
    z = np.empty((b, m))
    z[:, :n] = obs
    z[:, n] = act
    c1 = m * H
    cw1 = c_theta[:c1].reshape(m, H)
    cb1 = c_theta[c1 : c1 + H]
    c2 = c1 + H
    cw2 = c_theta[c2 : c2 + H * H].reshape(H, H)
    c3 = c2 + H * H
    cb2 = c_theta[c3 : c3 + H]
    c4 = c3 + H
    cw3 = c_theta[c4 : c4 + H]
    cb3 = c_theta[c4 + H]
    g1 = np.maximum(np.dot(z, cw1) + cb1, 0.0)
    g2 = np.maximum(np.dot(g1, cw2) + cb2, 0.0)
    q = np.dot(g2, cw3) + cb3

    mean_q = np.mean(q)

    # dQ/da through the critic, dq_i = 1/B
    dg2 = np.outer(np.full(b, 1.0 / b), cw3) * np.where(g2 > 0.0, 1.0, 0.0)
    dg1 = np.dot(dg2, cw2.T) * np.where(g1 > 0.0, 1.0, 0.0)
    dz = np.dot(dg1, cw1.T)                   # (B, m)
    dact = dz[:, n]                           # (B,)

    # through the affine map and the tanh
    dpre3 = dact * ACT_SCALE * (1.0 - u * u)  # (B,)

    dw3 = np.dot(h2.T, dpre3)
    db3 = np.sum(dpre3)
    dh2 = np.outer(dpre3, aw3) * np.where(h2 > 0.0, 1.0, 0.0)
    dw2 = np.dot(h1.T, dh2)
    db2 = np.sum(dh2, axis=0)
    dh1 = np.dot(dh2, aw2.T) * np.where(h1 > 0.0, 1.0, 0.0)
    dw1 = np.dot(obs.T, dh1)
    db1 = np.sum(dh1, axis=0)

    # descent direction for gradient ascent on mean Q
    grad[:o1] = -dw1.ravel()
    grad[o1 : o1 + H] = -db1
    grad[o2 : o2 + H * H] = -dw2.ravel()
    grad[o3 : o3 + H] = -db2
    grad[o4 : o4 + H] = -dw3
    grad[o4 + H] = -db3
    return mean_q


@jit
def ddpg_targets(a_targ, c_targ, next_obs, rew, done, gamma, n):
    """Bootstrap targets y = r + gamma * (1 - done) * Q'(s', mu'(s'))."""
    u = actor_units(a_targ, next_obs, n)
    act = ACT_SCALE * u + ACT_SHIFT
    qn = critic_values(c_targ, next_obs, act, n)
    return rew + gamma * (1.0 - done) * qn


@jit
def adam_step(theta, grad, m, v, t, lr, beta1, beta2, eps):
    """One in-place Adam update; ``t`` is the 1-based step count."""
    m[:] = beta1 * m + (1.0 - beta1) * grad
    v[:] = beta2 * v + (1.0 - beta2) * grad * grad
    mhat = m / (1.0 - beta1**t)
    vhat = v / (1.0 - beta2**t)
    theta[:] = theta - lr * mhat / (np.sqrt(vhat) + eps)


@jit
def soft_update(target, online, tau):
    """Polyak tracking: target <- tau*online + (1-tau)*target, in place."""
    target[:] = tau * online + (1.0 - tau) * target


@jit
def ddpg_update(
    a_theta,
    a_m,
    a_v,
    c_theta,
    c_m,
    c_v,
    a_targ,
    c_targ,
    steps,
    obs,
    act,
    rew,
    next_obs,
    done,
    n,
    gamma,
    tau,
    lr_actor,
    lr_critic,
):
    """One fused learner update on a sampled batch.

    Critic regression step first, then the actor ascends the freshly updated
    critic, then both target networks track softly. ``steps`` is an int64[2]
    holding the Adam step counters (actor, critic), incremented here.
    Returns (critic_loss, mean_q).
    """
    y = ddpg_targets(a_targ, c_targ, next_obs, rew, done, gamma, n)

    cg = np.empty_like(c_theta)
    closs = critic_grad(c_theta, obs, act, y, cg, n)
    steps[1] += 1
    adam_step(c_theta, cg, c_m, c_v, steps[1], lr_critic, ADAM_BETA1, ADAM_BETA2, ADAM_EPS)

    ag = np.empty_like(a_theta)
    mean_q = actor_grad(a_theta, c_theta, obs, ag, n)
    steps[0] += 1
    adam_step(a_theta, ag, a_m, a_v, steps[0], lr_actor, ADAM_BETA1, ADAM_BETA2, ADAM_EPS)

    soft_update(a_targ, a_theta, tau)
    soft_update(c_targ, c_theta, tau)
    return closs, mean_q
