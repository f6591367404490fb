"""Pure-numpy kernel backend.

Semantics are the contract shared with the compiled backend; the test suite
runs both against each other. Tie-breaking rules:

  * rasterize: smaller depth wins; exact depth ties go to the smaller tie
    value (callers pass the face's view-facing dot product, so grazing ties
    resolve to the more front-facing face, independent of input order).
  * raycast: smallest hit parameter t > t_min wins; exact t ties prefer a
    front-facing hit, then the smaller triangle index.
  * closest_tri: smallest distance, ties to the smaller triangle index.
"""

from __future__ import annotations

import numpy as np

from .bvh import Bvh

_INF = np.inf


def rasterize_tris(xyd: np.ndarray, tie: np.ndarray, h: int, half_w: float):
    """Rasterize camera-space triangles (x, y in frame units, d = depth).

    Returns (tri_idx (h,h) int32 with -1 empty, depth (h,h) float64 inf).
    Pixel (row, col) covers the center point x = -half_w + (col+.5)*pitch,
    y = -half_w + (row+.5)*pitch. Coverage includes edges.
    """
    tri_idx = np.full((h, h), -1, dtype=np.int32)
    depth = np.full((h, h), _INF, dtype=np.float64)
    tie_grid = np.full((h, h), _INF, dtype=np.float64)
    if len(xyd) == 0:
        return tri_idx, depth
    pitch = 2.0 * half_w / h
    xs = -half_w + (np.arange(h) + 0.5) * pitch
    for t in range(len(xyd)):
        (x0, y0, d0), (x1, y1, d1), (x2, y2, d2) = xyd[t]
        area2 = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if area2 == 0.0:
            continue
        if area2 < 0.0:
            x1, y1, d1, x2, y2, d2 = x2, y2, d2, x1, y1, d1
            area2 = -area2
        cmin = max(0, int(np.ceil((min(x0, x1, x2) + half_w) / pitch - 0.5)))
        cmax = min(h - 1, int(np.floor((max(x0, x1, x2) + half_w) / pitch - 0.5)))
        rmin = max(0, int(np.ceil((min(y0, y1, y2) + half_w) / pitch - 0.5)))
        rmax = min(h - 1, int(np.floor((max(y0, y1, y2) + half_w) / pitch - 0.5)))
        if cmin > cmax or rmin > rmax:
            continue
        px = xs[cmin : cmax + 1][None, :]
        py = xs[rmin : rmax + 1][:, None]
        w0 = (x1 - px) * (y2 - py) - (y1 - py) * (x2 - px)
        w1 = (x2 - px) * (y0 - py) - (y2 - py) * (x0 - px)
        w2 = (x0 - px) * (y1 - py) - (y0 - py) * (x1 - px)
        inside = (w0 >= 0) & (w1 >= 0) & (w2 >= 0)
        if not inside.any():
            continue
        d = (w0 * d0 + w1 * d1 + w2 * d2) / area2
        sub_d = depth[rmin : rmax + 1, cmin : cmax + 1]
        sub_t = tie_grid[rmin : rmax + 1, cmin : cmax + 1]
        better = inside & ((d < sub_d) | ((d == sub_d) & (tie[t] < sub_t)))
        if better.any():
            sub_i = tri_idx[rmin : rmax + 1, cmin : cmax + 1]
            sub_d[better] = d[better]
            sub_t[better] = tie[t]
            sub_i[better] = t
    return tri_idx, depth


def raycast_first_hit(origins: np.ndarray, direction: np.ndarray, bvh: Bvh,
                      t_min: float = 1e-9):
    """First hit of parallel rays against the BVH triangles.

    Returns (t (R,) inf on miss, tri (R,) int32 -1, front (R,) uint8).
    The BVH is ignored here: brute force is vectorized over all triangles.
    """
    tv = bvh.tv
    r = len(origins)
    t_out = np.full(r, _INF)
    tri_out = np.full(r, -1, dtype=np.int32)
    front_out = np.zeros(r, dtype=np.uint8)
    if len(tv) == 0 or r == 0:
        return t_out, tri_out, front_out
    d = np.asarray(direction, dtype=np.float64)
    a = tv[:, 0]
    e1 = tv[:, 1] - a
    e2 = tv[:, 2] - a
    pvec = np.cross(d[None, :], e2)  # (T, 3)
    det = np.einsum("tj,tj->t", e1, pvec)
    ok_det = np.abs(det) > 1e-14
    inv_det = np.where(ok_det, 1.0 / np.where(ok_det, det, 1.0), 0.0)
    chunk = max(1, int(4e6 // max(1, len(tv))))
    big = len(tv)
    for s in range(0, r, chunk):
        o = origins[s : s + chunk]  # (C, 3)
        tvec = o[:, None, :] - a[None, :, :]  # (C, T, 3)
        u = np.einsum("ctj,tj->ct", tvec, pvec) * inv_det[None, :]
        qvec = np.cross(tvec, e1[None, :, :])
        v = np.einsum("ctj,j->ct", qvec, d) * inv_det[None, :]
        t = np.einsum("ctj,tj->ct", qvec, e2) * inv_det[None, :]
        valid = (
            ok_det[None, :]
            & (u >= -1e-12)
            & (v >= -1e-12)
            & (u + v <= 1.0 + 1e-12)
            & (t > t_min)
        )
        t = np.where(valid, t, _INF)
        tmin = t.min(axis=1)
        hit = np.isfinite(tmin)
        is_min = valid & (t == tmin[:, None])
        front = det[None, :] > 0  # det > 0 <=> triangle faces against the ray
        front_aligned = is_min & front
        any_front = front_aligned.any(axis=1)
        pick = np.where(any_front[:, None], front_aligned, is_min)
        tri = np.where(pick, np.arange(len(tv))[None, :], big).min(axis=1)
        rows = np.nonzero(hit)[0]
        t_out[s + rows] = tmin[rows]
        tri_out[s + rows] = tri[rows].astype(np.int32)
        front_out[s + rows] = any_front[rows].astype(np.uint8)
    return t_out, tri_out, front_out


def _closest_point_on_tris(p: np.ndarray, a, b, c):
    """Closest points on triangles (a, b, c) for paired query points p.
    All inputs (N, 3); region-based projection with barycentric clamping."""
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)
    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    out = np.empty_like(p)
    done = np.zeros(len(p), dtype=bool)

    def assign(mask, value):
        m = mask & ~done
        if m.any():
            out[m] = value[m] if value.ndim == 2 else value
            done[m] = True

    assign((d1 <= 0) & (d2 <= 0), a)
    assign((d3 >= 0) & (d4 <= d3), b)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_ab = np.where(d1 - d3 != 0, d1 / (d1 - d3), 0.0)
        assign((vc <= 0) & (d1 >= 0) & (d3 <= 0), a + t_ab[:, None] * ab)
        assign((d6 >= 0) & (d5 <= d6), c)
        t_ac = np.where(d2 - d6 != 0, d2 / (d2 - d6), 0.0)
        assign((vb <= 0) & (d2 >= 0) & (d6 <= 0), a + t_ac[:, None] * ac)
        den_bc = (d4 - d3) + (d5 - d6)
        t_bc = np.where(den_bc != 0, (d4 - d3) / np.where(den_bc != 0, den_bc, 1.0), 0.0)
        assign((va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0), b + t_bc[:, None] * (c - b))
        den = va + vb + vc
        safe = np.where(den != 0, den, 1.0)
        v = vb / safe
        w = vc / safe
        inner = a + v[:, None] * ab + w[:, None] * ac
        # degenerate triangles fall back to the nearest vertex
        bad = den == 0
        if bad.any():
            cands = np.stack([a, b, c], axis=1)
            dd = np.linalg.norm(cands - p[:, None, :], axis=2)
            inner = np.where(bad[:, None], cands[np.arange(len(p)), dd.argmin(axis=1)], inner)
        assign(np.ones(len(p), dtype=bool), inner)
    return out


def closest_tri(points: np.ndarray, bvh: Bvh, chunk: int = 256):
    """Distance to the nearest triangle and its index, per query point.
    Brute force over all triangles, chunked over points."""
    tv = bvh.tv
    p = np.asarray(points, dtype=np.float64)
    n = len(p)
    dist = np.full(n, _INF)
    tri = np.full(n, -1, dtype=np.int32)
    if len(tv) == 0 or n == 0:
        return dist, tri
    t = len(tv)
    a = tv[:, 0]
    b = tv[:, 1]
    c = tv[:, 2]
    for s in range(0, n, chunk):
        q = p[s : s + chunk]
        m = len(q)
        pp = np.repeat(q, t, axis=0)
        aa = np.tile(a, (m, 1))
        bb = np.tile(b, (m, 1))
        cc = np.tile(c, (m, 1))
        cp = _closest_point_on_tris(pp, aa, bb, cc)
        d = np.linalg.norm(cp - pp, axis=1).reshape(m, t)
        tri[s : s + chunk] = d.argmin(axis=1).astype(np.int32)  # first min: smallest index
        dist[s : s + chunk] = d.min(axis=1)
    return dist, tri
