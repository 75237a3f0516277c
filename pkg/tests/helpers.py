"""Shared generators and independent oracles for the test suite."""
from __future__ import annotations

import heapq
import math

import numpy as np

from lean3d.hierarchy import VoxelLevel


def random_cloud(rng, n, span=32768.0, dup_frac=0.1):
    """Random points in [-span, span)^3 with a slice of exact duplicates."""
    pts = rng.uniform(-span, span, size=(n, 3))
    n_dup = int(n * dup_frac)
    if n_dup and n > n_dup:
        src = rng.integers(0, n - n_dup, size=n_dup)
        pts[n - n_dup :] = pts[src]
    return pts


def structured_scene(rng, n_planes=3, n_clusters=4, span=200.0):
    """Planes plus Gaussian clusters; highly predictable occupancy."""
    parts = []
    for _ in range(n_planes):
        n = int(rng.integers(400, 900))
        u = rng.uniform(-span, span, size=(n, 2))
        axis = int(rng.integers(0, 3))
        offset = rng.uniform(-span, span)
        pts = np.empty((n, 3))
        pts[:, axis] = offset + rng.normal(0, 0.2, size=n)
        others = [a for a in range(3) if a != axis]
        pts[:, others[0]] = u[:, 0]
        pts[:, others[1]] = u[:, 1]
        parts.append(pts)
    for _ in range(n_clusters):
        n = int(rng.integers(200, 500))
        center = rng.uniform(-span, span, size=3)
        parts.append(center + rng.normal(0, 6.0, size=(n, 3)))
    return np.concatenate(parts)


def random_voxel_level(rng, n, span=1000):
    """A valid level: unique canonical coords, occupancy codes 1..255."""
    coords = np.unique(rng.integers(-span, span, size=(n, 3)), axis=0)
    order = np.lexsort((coords[:, 0], coords[:, 1], coords[:, 2]))
    coords = coords[order]
    occ = rng.integers(1, 256, size=len(coords)).astype(np.uint8)
    return VoxelLevel(coords, occ)


def level_with_popcounts(rng, popcounts):
    """A level whose occupancy codes have the given popcounts (in order)."""
    n = len(popcounts)
    coords = np.stack(
        [np.zeros(n, np.int64), np.zeros(n, np.int64), np.arange(n, dtype=np.int64)],
        axis=1,
    )
    occ = np.empty(n, dtype=np.uint8)
    for i, pc in enumerate(popcounts):
        bits = rng.choice(8, size=pc, replace=False)
        occ[i] = np.bitwise_or.reduce(np.uint8(1) << bits.astype(np.uint8))
    return VoxelLevel(coords, occ)


def brute_force_bpa(children):
    """Dict-based parent aggregation oracle."""
    parents = {}
    for x, y, z in children:
        key = (math.floor(x / 2), math.floor(y / 2), math.floor(z / 2))
        k = (x % 2) + 2 * (y % 2) + 4 * (z % 2)
        parents[key] = parents.get(key, 0) | (1 << k)
    items = sorted(parents.items(), key=lambda it: (it[0][2], it[0][1], it[0][0]))
    coords = [it[0] for it in items]
    occ = [it[1] for it in items]
    return coords, occ


def brute_force_bce(coords, occ):
    """Set-based child expansion oracle."""
    out = set()
    for (x, y, z), code in zip(coords, occ):
        for k in range(8):
            if code & (1 << k):
                out.add((2 * x + (k & 1), 2 * y + ((k >> 1) & 1), 2 * z + ((k >> 2) & 1)))
    return sorted(out, key=lambda t: (t[2], t[1], t[0]))


def des_oracle(trace, bandwidth, arrival_period=0.0):
    """Independent discrete-event three-server FCFS pipeline.

    Events are (time, seq, kind, frame); each server pulls the next
    frame in order once it is idle and the frame has arrived.
    """
    n = len(trace)
    service = [
        [rec[0] for rec in trace],
        [rec[1] / bandwidth for rec in trace],
        [rec[2] for rec in trace],
    ]
    arrival = [[i * arrival_period for i in range(n)], [None] * n, [None] * n]
    start = [[None] * n for _ in range(3)]
    finish = [[None] * n for _ in range(3)]
    free_at = [0.0, 0.0, 0.0]
    next_frame = [0, 0, 0]
    events = [(i * arrival_period, i, "tick") for i in range(n)]
    heapq.heapify(events)
    seq = n
    while events:
        t, _, _ = heapq.heappop(events)
        progressed = True
        while progressed:
            progressed = False
            for stage in range(3):
                i = next_frame[stage]
                if i >= n:
                    continue
                arr = arrival[stage][i]
                if arr is None or arr > t or free_at[stage] > t:
                    continue
                start[stage][i] = max(arr, free_at[stage])
                finish[stage][i] = start[stage][i] + service[stage][i]
                free_at[stage] = finish[stage][i]
                if stage < 2:
                    arrival[stage + 1][i] = finish[stage][i]
                next_frame[stage] += 1
                heapq.heappush(events, (finish[stage][i], seq, "tick"))
                seq += 1
                progressed = True
    latency = [finish[2][i] - start[0][i] for i in range(n)]
    return start, finish, latency
