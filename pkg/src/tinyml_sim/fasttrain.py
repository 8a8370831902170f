"""Compiled Q-table training loop.

Replays what :func:`tinyml_sim.engine.train` does with an
:class:`~tinyml_sim.engine.Episode` and a learning
:class:`~tinyml_sim.policies.QLearningPolicy`, draw for draw, so both paths
produce bit-identical tables. The Python path stays the reference; this one
exists because useful training budgets run to millions of decisions.
"""
from __future__ import annotations

import numpy as np

from .core import RandomStream, StreamId, numba
from .retrain import accuracy_center

AVAILABLE = numba is not None

# float64 scalars shared with the kernel
ALPHA, EPSILON, ALPHA_DECAY, EPSILON_DECAY, VISIT_POWER, GAMMA, RHO, SPENT, SEEN, \
    PEND_ALPHA, RATIO, VALID = range(12)
# int64 scalars
CAPACITY, BASE, UPLOAD, TRAIN, RESET, N_CAP, REWARD, EXPLORE, START_MAX, STEPS = range(10)

REWARD_CODES = {"relative": 0, "savings": 1, "energy": 2}


def retrain_tables(n_cap: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-count accuracy center and 0.95**n, computed in Python so the
    kernel sees the same bits as :func:`validation_accuracy`."""
    center = np.zeros(n_cap + 1)
    power = np.zeros(n_cap + 1)
    for n in range(1, n_cap + 1):
        center[n] = accuracy_center(n)
        power[n] = 0.95**n
    return center, power


def _jit(f):
    return numba.njit(cache=True)(f) if AVAILABLE else f


@_jit
def _uniform(s):  # pragma: no cover - compiled
    s0, s1, s2, s3 = s[0], s[1], s[2], s[3]
    t = s1 * np.uint64(5)
    result = ((t << np.uint64(7)) | (t >> np.uint64(57))) * np.uint64(9)
    t = s1 << np.uint64(17)
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = (s3 << np.uint64(45)) | (s3 >> np.uint64(19))
    s[0] = s0
    s[1] = s1
    s[2] = s2
    s[3] = s3
    return float(result >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@_jit
def _learn(q, pend, f, ip, since, nb, nc, terminal):  # pragma: no cover - compiled
    # pend = [has, battery_bin, count_bin, action]
    # since = [onboard, uploads, train_energy, energy]
    if pend[0] == 0:
        return
    onboard = since[0]
    uploads = since[1]
    train_e = since[2]
    spent = uploads * ip[UPLOAD] + train_e
    f[SPENT] += spent
    f[SEEN] += onboard + uploads
    kind = ip[REWARD]
    if kind == 0:
        rho = f[RHO]
        if rho < 0.0:
            rho = float(ip[UPLOAD]) if f[SEEN] == 0.0 else f[SPENT] / f[SEEN]
        r = (rho * (onboard + uploads) - spent) / 1000.0
    elif kind == 1:
        r = (onboard * ip[UPLOAD] - train_e) / 1000.0
    else:
        r = -since[3] / 1000.0
    future = 0.0
    if not terminal:
        future = max(float(q[nb, nc, 0]), float(q[nb, nc, 1]))
    b, c, a = pend[1], pend[2], pend[3]
    current = float(q[b, c, a])
    q[b, c, a] = np.float32(current + f[PEND_ALPHA] * (r + f[GAMMA] * future - current))


@_jit
def train_episodes(q, updates, visited, f, ip, explore, env_states, retrain_states,
                   center, power):  # pragma: no cover - compiled
    """Run one training episode per row of ``env_states``; all arrays are
    updated in place."""
    pend = np.zeros(4, dtype=np.int64)
    since = np.zeros(4, dtype=np.int64)
    capacity = ip[CAPACITY]
    base = ip[BASE]
    upload = ip[UPLOAD]
    for e in range(env_states.shape[0]):
        env = env_states[e].copy()
        rt = retrain_states[e].copy()
        n = 0
        remaining = capacity
        if ip[EXPLORE] != 0:
            n = int(_uniform(explore) * ip[START_MAX])
            remaining = capacity - int(_uniform(explore) * capacity)
        budget = 0
        since[:] = 0
        pend[0] = 0
        while True:
            if remaining < base:
                break
            remaining -= base
            since[3] += base
            if _uniform(env) >= f[RATIO]:
                continue
            if budget > 0:
                budget -= 1
                since[0] += 1
                continue
            if remaining < upload:
                break
            remaining -= upload
            since[1] += 1
            since[3] += upload
            n = min(n + 1, ip[N_CAP])
            frac = remaining / capacity if capacity > 0 else 0.0
            nb = min(int(np.floor(frac * 10)), 9)
            nc = min(n // 5, 9)
            visited[nb, nc] = True
            _learn(q, pend, f, ip, since, nb, nc, False)
            f[ALPHA] *= f[ALPHA_DECAY]
            f[EPSILON] *= f[EPSILON_DECAY]
            ip[STEPS] += 1
            action = 0
            explored = False
            if f[EPSILON] > 0.0:
                if _uniform(explore) < f[EPSILON]:
                    action = min(int(_uniform(explore) * 2), 1)
                    explored = True
            if not explored:
                action = 1 if q[nb, nc, 1] > q[nb, nc, 0] else 0
            visits = updates[nb, nc, action]
            if f[VISIT_POWER] == 0.0:
                f[PEND_ALPHA] = f[ALPHA]
            else:
                f[PEND_ALPHA] = f[ALPHA] / (1.0 + visits) ** f[VISIT_POWER]
            updates[nb, nc, action] += 1
            pend[0] = 1
            pend[1] = nb
            pend[2] = nc
            pend[3] = action
            since[:] = 0
            if action != 1 or n < 1:
                continue
            r = _uniform(rt)
            acc = center[n] - (2.0 * r - 1.0) / 10.0 * power[n]
            acc = min(1.0, max(0.0, acc))
            cost = ip[TRAIN] * n
            if remaining < cost:
                break
            remaining -= cost
            since[3] += cost
            since[2] += cost
            if acc >= f[VALID]:
                n = 0
                budget = ip[RESET]
        _learn(q, pend, f, ip, since, 0, 0, True)
        pend[0] = 0


def stream_state(seed: int, stream_id: StreamId) -> np.ndarray:
    """Initial xoshiro state of ``RandomStream(seed, stream_id)``."""
    return RandomStream(seed, stream_id)._state.copy()
