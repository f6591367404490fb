"""Axis-aligned BVH over triangles, stored as flat arrays so both kernel
backends can traverse it without touching Python objects."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LEAF_SIZE = 4


@dataclass
class Bvh:
    bmin: np.ndarray  # (N, 3)
    bmax: np.ndarray  # (N, 3)
    left: np.ndarray  # (N,) int32, -1 on leaves
    right: np.ndarray  # (N,) int32
    start: np.ndarray  # (N,) int32 offset into tri_order
    count: np.ndarray  # (N,) int32, 0 on inner nodes
    tri_order: np.ndarray  # (T,) int32
    tv: np.ndarray  # (T, 3, 3) float64 triangle vertices


def build_bvh(tv: np.ndarray) -> Bvh:
    tv = np.ascontiguousarray(np.asarray(tv, dtype=np.float64))
    t = len(tv)
    if t == 0:
        raise ValueError("cannot build a BVH over zero triangles")
    tmin = tv.min(axis=1)
    tmax = tv.max(axis=1)
    cent = tv.mean(axis=1)

    bmin, bmax, left, right, start, count = [], [], [], [], [], []
    order: list[int] = []

    def _node(idx: np.ndarray) -> int:
        node = len(bmin)
        bmin.append(tmin[idx].min(axis=0))
        bmax.append(tmax[idx].max(axis=0))
        left.append(-1)
        right.append(-1)
        start.append(0)
        count.append(0)
        if len(idx) <= LEAF_SIZE:
            start[node] = len(order)
            count[node] = len(idx)
            order.extend(int(i) for i in idx)
            return node
        c = cent[idx]
        axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
        mid = len(idx) // 2
        part = idx[np.argsort(c[:, axis], kind="stable")]
        lo, hi = part[:mid], part[mid:]
        left[node] = _node(lo)
        right[node] = _node(hi)
        return node

    import sys

    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 10000))
    try:
        _node(np.arange(t, dtype=np.int64))
    finally:
        sys.setrecursionlimit(old)
    return Bvh(
        np.ascontiguousarray(bmin, dtype=np.float64),
        np.ascontiguousarray(bmax, dtype=np.float64),
        np.asarray(left, dtype=np.int32),
        np.asarray(right, dtype=np.int32),
        np.asarray(start, dtype=np.int32),
        np.asarray(count, dtype=np.int32),
        np.asarray(order, dtype=np.int32),
        tv,
    )
