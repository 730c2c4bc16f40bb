"""Compiled inner loops for the Clean-up environment and tabular MTMFQ.

All randomness is drawn by the caller and passed in as uniform arrays, so
these kernels are deterministic functions of their inputs.
"""

from __future__ import annotations

import numpy as np
from numba import njit

UP, DOWN, LEFT, RIGHT, STAY, INTERACT = 0, 1, 2, 3, 4, 5
DR = np.array([-1, 1, 0, 0, 0, 0])
DC = np.array([0, 0, -1, 1, 0, 0])
HARVESTER = 0

# feature layout (kept in sync with marl.N_KEYS)
N_DIR = 14
N_COUNT = 16  # joint (apple, waste) count code; resolution differs by type
# lower bucket edges: harvesters split both counts 4 ways, cleaners trade
# apple resolution for waste resolution
APPLE_EDGES = (np.array([0, 1, 3, 6]), np.array([0, 1]))
WASTE_EDGES = (np.array([0, 1, 3, 6]), np.array([0, 1, 2, 3, 4, 5, 7, 10]))
N_AGENT = 3
N_WALL = 4


@njit(cache=True)
def transition(pos, orient, types, apples, waste, actions, prio_u, spawn_u, river, harvest,
               waste_p, apple_base_p, threshold, harvested, cleaned):
    """Advance one step in place. Returns (apples spawned, waste spawned)."""
    n = pos.shape[0]
    H, W = apples.shape
    for i in range(n):
        harvested[i] = 0
        cleaned[i] = 0
        if actions[i] == INTERACT:
            r, c = pos[i, 0], pos[i, 1]
            if types[i] == HARVESTER:
                if apples[r, c]:
                    apples[r, c] = False
                    harvested[i] = 1
            elif waste[r, c]:
                waste[r, c] = False
                cleaned[i] = 1
    order = np.argsort(prio_u, kind="mergesort")
    for k in range(n):
        i = order[k]
        a = actions[i]
        if a >= STAY:
            continue
        orient[i] = a
        r = pos[i, 0] + DR[a]
        c = pos[i, 1] + DC[a]
        if r < 0 or r >= H or c < 0 or c >= W:
            continue
        blocked = False
        for j in range(n):
            if j != i and pos[j, 0] == r and pos[j, 1] == c:
                blocked = True
                break
        if not blocked:
            pos[i, 0] = r
            pos[i, 1] = c
    n_river = 0
    n_waste = 0
    for r in range(H):
        for c in range(W):
            if river[r, c]:
                n_river += 1
                if waste[r, c]:
                    n_waste += 1
    density = n_waste / n_river if n_river > 0 else 0.0
    p_apple = 0.0
    if threshold > 0.0:
        p_apple = apple_base_p * max(0.0, 1.0 - density / threshold)
    new_w = 0
    new_a = 0
    for r in range(H):
        for c in range(W):
            if river[r, c] and not waste[r, c] and spawn_u[0, r, c] < waste_p:
                waste[r, c] = True
                new_w += 1
            if harvest[r, c] and not apples[r, c] and spawn_u[1, r, c] < p_apple:
                apples[r, c] = True
                new_a += 1
    return new_a, new_w


@njit(cache=True)
def _bucket(x, edges):
    b = 0
    for k in range(1, edges.shape[0]):
        if x >= edges[k]:
            b = k
    return b


H_APPLE, H_WASTE = APPLE_EDGES[0], WASTE_EDGES[0]
C_APPLE, C_WASTE = APPLE_EDGES[1], WASTE_EDGES[1]


@njit(cache=True)
def count_code(n_apple, n_waste, agent_type):
    if agent_type == HARVESTER:
        return _bucket(n_apple, H_APPLE) * H_WASTE.shape[0] + _bucket(n_waste, H_WASTE)
    return _bucket(n_apple, C_APPLE) * C_WASTE.shape[0] + _bucket(n_waste, C_WASTE)


@njit(cache=True)
def features(pos, types, apples, waste, radius, keys):
    """Feature key per agent; matches ``featurize_batch(observe(...))``."""
    n = pos.shape[0]
    H, W = apples.shape
    w = 2 * radius + 1
    for i in range(n):
        r0, c0 = pos[i, 0], pos[i, 1]
        best = -1
        best_rank = 1 << 60
        n_apple = 0
        n_waste = 0
        for dr in range(-radius, radius + 1):
            for dc in range(-radius, radius + 1):
                r = r0 + dr
                c = c0 + dc
                if r < 0 or r >= H or c < 0 or c >= W:
                    continue
                a = apples[r, c]
                ws = waste[r, c]
                n_apple += a
                n_waste += ws
                tgt = a if types[i] == HARVESTER else ws
                if tgt:
                    d = abs(dr) + abs(dc)
                    rank = d * w * w + (dr + radius) * w + (dc + radius)
                    if rank < best_rank:
                        best_rank = rank
                        if d == 0:
                            best = 1
                        else:
                            if abs(dr) >= abs(dc):
                                direction = 0 if dr < 0 else 1
                            else:
                                direction = 2 if dc < 0 else 3
                            best = 2 + direction * 3 + min(d, 3) - 1
        dir_code = best if best >= 0 else 0
        nh = 0
        nc = 0
        for j in range(n):
            if j == i:
                continue
            if abs(pos[j, 0] - r0) <= radius and abs(pos[j, 1] - c0) <= radius:
                if types[j] == HARVESTER:
                    nh += 1
                else:
                    nc += 1
        wall = 2 * (c0 - radius < 0) + (c0 + radius >= W)
        key = dir_code
        key = key * N_COUNT + count_code(n_apple, n_waste, types[i])
        key = key * N_AGENT + min(nh, N_AGENT - 1)
        key = key * N_AGENT + min(nc, N_AGENT - 1)
        key = key * N_WALL + wall
        keys[i] = key


@njit(cache=True)
def mean_index(actions, members, group_of_action, n_groups, divisions, empty_group, lookup):
    """Simplex-grid index of one type's action distribution (largest remainder)."""
    counts = np.zeros(n_groups, dtype=np.int64)
    m = members.shape[0]
    if m == 0:
        counts[empty_group] = divisions
    else:
        raw = np.zeros(n_groups)
        for k in range(m):
            raw[group_of_action[actions[members[k]]]] += 1.0
        total = 0
        rem = np.zeros(n_groups)
        for g in range(n_groups):
            scaled = raw[g] / m * divisions
            base = int(np.floor(scaled + 1e-12))
            counts[g] = base
            rem[g] = scaled - base
            total += base
        for _ in range(divisions - total):
            best = 0
            for g in range(1, n_groups):
                if rem[g] > rem[best]:
                    best = g
            counts[best] += 1
            rem[best] = -1.0
    idx = 0
    for g in range(n_groups):
        idx = idx * (divisions + 1) + counts[g]
    return lookup[idx]


@njit(cache=True)
def run_episode(q_h, q_c, pos, orient, types, apples, waste, river, harvest, params,
                spawn_u, prio_u, explore_u, random_a, noise, learn, lr, gamma,
                group_of_action, n_groups, divisions, empty_group, lookup,
                returns, apples_t, waste_t):
    """One episode of epsilon-greedy MTMFQ. Returns (collective reward, welfare).

    params: waste_p, apple_base_p, threshold, alpha, harvest_reward, c_h, c_k,
    epsilon, radius.
    """
    waste_p, apple_p, threshold = params[0], params[1], params[2]
    alpha, h_reward, c_h, c_k, eps = params[3], params[4], params[5], params[6], params[7]
    radius = int(params[8])
    T = spawn_u.shape[0]
    n = pos.shape[0]
    h_members = np.where(types == HARVESTER)[0]
    c_members = np.where(types != HARVESTER)[0]
    n_c = c_members.shape[0]
    keys = np.zeros(n, dtype=np.int64)
    next_keys = np.zeros(n, dtype=np.int64)
    actions = np.full(n, STAY, dtype=np.int64)
    harvested = np.zeros(n, dtype=np.int64)
    cleaned = np.zeros(n, dtype=np.int64)
    rewards = np.zeros(n)
    river_cells = 0
    for r in range(river.shape[0]):
        for c in range(river.shape[1]):
            river_cells += river[r, c]
    features(pos, types, apples, waste, radius, keys)
    mh = mean_index(actions, h_members, group_of_action, n_groups, divisions, empty_group, lookup)
    mc = mean_index(actions, c_members, group_of_action, n_groups, divisions, empty_group, lookup)
    collective = 0.0
    welfare = 0.0
    for t in range(T):
        for i in range(n):
            if explore_u[t, i] < eps:
                actions[i] = random_a[t, i]
            else:
                best = 0
                best_v = -np.inf
                for a in range(6):
                    if types[i] == HARVESTER:
                        v = q_h[keys[i], mh, mc, a]
                    else:
                        v = q_c[keys[i], mh, mc, a]
                    v += noise[t, i, a]
                    if v > best_v:
                        best_v = v
                        best = a
                actions[i] = best
        transition(pos, orient, types, apples, waste, actions, prio_u[t], spawn_u[t], river, harvest,
                   waste_p, apple_p, threshold, harvested, cleaned)
        pool = 0.0
        step_welfare = 0.0
        for i in range(n):
            if types[i] == HARVESTER:
                intrinsic = h_reward * harvested[i]
                pool += alpha * intrinsic
                rewards[i] = intrinsic - alpha * intrinsic - c_h
                step_welfare += intrinsic - c_h
            else:
                step_welfare -= c_k * cleaned[i]
        for i in range(n):
            if types[i] != HARVESTER:
                rewards[i] = pool / n_c - c_k * cleaned[i]
        features(pos, types, apples, waste, radius, next_keys)
        nh = mean_index(actions, h_members, group_of_action, n_groups, divisions, empty_group, lookup)
        nc = mean_index(actions, c_members, group_of_action, n_groups, divisions, empty_group, lookup)
        if learn:
            done = t == T - 1
            for i in range(n):
                q = q_h if types[i] == HARVESTER else q_c
                target = rewards[i]
                if not done:
                    m = q[next_keys[i], nh, nc, 0]
                    for a in range(1, 6):
                        if q[next_keys[i], nh, nc, a] > m:
                            m = q[next_keys[i], nh, nc, a]
                    target += gamma * m
                q[keys[i], mh, mc, actions[i]] += lr * (target - q[keys[i], mh, mc, actions[i]])
        for i in range(n):
            returns[i] += rewards[i]
            collective += rewards[i]
            keys[i] = next_keys[i]
        welfare += step_welfare
        mh = nh
        mc = nc
        n_apples = 0
        n_waste = 0
        for r in range(apples.shape[0]):
            for c in range(apples.shape[1]):
                n_apples += apples[r, c]
                n_waste += waste[r, c]
        apples_t[t] = n_apples
        waste_t[t] = n_waste / river_cells if river_cells > 0 else 0.0
    return collective, welfare
