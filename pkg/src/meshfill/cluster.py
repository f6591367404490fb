"""Density-based clustering of broken points.

Deterministic DBSCAN: points are visited in index order and cluster
expansion consumes a FIFO queue, so labels are a pure function of the
input. A point is core when its closed eps-ball holds >= min_pts points
(itself included).
"""

from __future__ import annotations

from collections import deque

import numpy as np
from scipy.spatial import cKDTree

NOISE = -1


def dbscan(points: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """Labels (N,) int32: cluster ids 0..K-1 in discovery order, -1 noise."""
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if min_pts < 1:
        raise ValueError("min_pts must be >= 1")
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    n = len(pts)
    labels = np.full(n, NOISE, dtype=np.int32)
    if n == 0:
        return labels
    if min_pts == 1:
        # every point is core: clustering degenerates to connected
        # components of the closed-eps graph, solvable without
        # materializing the quadratic neighborhood lists
        return _eps_components(pts, eps)
    tree = cKDTree(pts)
    neighborhoods = tree.query_ball_point(pts, eps, return_sorted=True)
    visited = np.zeros(n, dtype=bool)
    enqueued = np.full(n, -1, dtype=np.int64)  # cluster the point was queued for
    cluster = 0
    for i in range(n):
        if visited[i]:
            continue
        visited[i] = True
        if len(neighborhoods[i]) < min_pts:
            continue  # stays noise unless later absorbed as a border point
        labels[i] = cluster
        queue = deque(neighborhoods[i])
        enqueued[neighborhoods[i]] = cluster
        while queue:
            j = queue.popleft()
            if labels[j] == NOISE:
                labels[j] = cluster  # border or newly reached point
            if visited[j]:
                continue
            visited[j] = True
            if len(neighborhoods[j]) >= min_pts:
                for nb in neighborhoods[j]:
                    if enqueued[nb] != cluster:
                        enqueued[nb] = cluster
                        queue.append(nb)
        cluster += 1
    return labels


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        p = self.parent
        root = i
        while p[root] != root:
            root = p[root]
        while p[i] != root:
            p[i], i = root, p[i]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


def _eps_components(pts: np.ndarray, eps: float) -> np.ndarray:
    """Connected components of the closed-eps proximity graph.

    Points sharing a grid cell of edge eps/sqrt(3) are provably within eps
    of each other; cross-cell links are checked pairwise but skipped once
    the cells already share a component.
    """
    n = len(pts)
    cell = eps / np.sqrt(3.0) * (1.0 - 1e-12)
    keys = np.floor(pts / cell).astype(np.int64)
    buckets: dict[tuple[int, int, int], list[int]] = {}
    for i, k in enumerate(map(tuple, keys)):
        buckets.setdefault(k, []).append(i)
    uf = _UnionFind(n)
    for members in buckets.values():
        first = members[0]
        for m in members[1:]:
            uf.union(first, m)
    # offsets whose cells can possibly hold a point within eps
    offsets = []
    for dx in range(-2, 3):
        for dy in range(-2, 3):
            for dz in range(-2, 3):
                if (dx, dy, dz) <= (0, 0, 0):
                    continue  # each unordered pair once
                gap = np.array([max(0, abs(d) - 1) for d in (dx, dy, dz)], dtype=float)
                if np.linalg.norm(gap) * cell <= eps:
                    offsets.append((dx, dy, dz))
    for key, members in buckets.items():
        a = np.asarray(members)
        pa = pts[a]
        for off in offsets:
            nb = (key[0] + off[0], key[1] + off[1], key[2] + off[2])
            other = buckets.get(nb)
            if other is None or uf.find(members[0]) == uf.find(other[0]):
                continue
            b = np.asarray(other)
            d2 = ((pa[:, None, :] - pts[b][None, :, :]) ** 2).sum(axis=2)
            hit = np.nonzero(d2 <= eps * eps)
            if len(hit[0]):
                uf.union(members[0], other[0])
                # intra-cell members are already united, one link suffices
    labels = np.full(n, NOISE, dtype=np.int32)
    roots: dict[int, int] = {}
    for i in range(n):
        r = uf.find(i)
        if r not in roots:
            roots[r] = len(roots)  # discovery order = smallest member first
        labels[i] = roots[r]
    return labels


def clusters_from_labels(labels: np.ndarray, min_size: int = 1) -> list[np.ndarray]:
    """Member-index arrays per cluster, discovery order, dropping clusters
    smaller than ``min_size`` and all noise."""
    out = []
    for cid in range(labels.max() + 1 if len(labels) else 0):
        members = np.nonzero(labels == cid)[0]
        if len(members) >= min_size:
            out.append(members)
    return out
