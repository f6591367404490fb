# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled kernel backend.

Must stay semantically identical to _impl_py (the equivalence test runs
both): same tie-break rules, same epsilons, same region logic for the
point-triangle distance.
"""

from libc.math cimport INFINITY, ceil, fabs, floor, sqrt

import numpy as np

cimport numpy as cnp

cnp.import_array()


def rasterize_tris(xyd, tie, int h, double half_w):
    cdef cnp.ndarray[cnp.float64_t, ndim=3] v = np.ascontiguousarray(xyd, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] tie_arr = np.ascontiguousarray(tie, dtype=np.float64)
    cdef cnp.ndarray[cnp.int32_t, ndim=2] tri_idx = np.full((h, h), -1, dtype=np.int32)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] depth = np.full((h, h), np.inf, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] tie_grid = np.full((h, h), np.inf, dtype=np.float64)
    cdef Py_ssize_t t, n = v.shape[0]
    cdef double pitch = 2.0 * half_w / h
    cdef double x0, y0, d0, x1, y1, d1, x2, y2, d2, tmp
    cdef double area2, xmin, xmax, ymin, ymax, px, py, w0, w1, w2, d
    cdef Py_ssize_t cmin, cmax, rmin, rmax, r, c
    if n == 0:
        return tri_idx, depth
    for t in range(n):
        x0 = v[t, 0, 0]; y0 = v[t, 0, 1]; d0 = v[t, 0, 2]
        x1 = v[t, 1, 0]; y1 = v[t, 1, 1]; d1 = v[t, 1, 2]
        x2 = v[t, 2, 0]; y2 = v[t, 2, 1]; d2 = v[t, 2, 2]
        area2 = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if area2 == 0.0:
            continue
        if area2 < 0.0:
            tmp = x1; x1 = x2; x2 = tmp
            tmp = y1; y1 = y2; y2 = tmp
            tmp = d1; d1 = d2; d2 = tmp
            area2 = -area2
        xmin = x0
        if x1 < xmin: xmin = x1
        if x2 < xmin: xmin = x2
        xmax = x0
        if x1 > xmax: xmax = x1
        if x2 > xmax: xmax = x2
        ymin = y0
        if y1 < ymin: ymin = y1
        if y2 < ymin: ymin = y2
        ymax = y0
        if y1 > ymax: ymax = y1
        if y2 > ymax: ymax = y2
        cmin = <Py_ssize_t>ceil((xmin + half_w) / pitch - 0.5)
        cmax = <Py_ssize_t>floor((xmax + half_w) / pitch - 0.5)
        rmin = <Py_ssize_t>ceil((ymin + half_w) / pitch - 0.5)
        rmax = <Py_ssize_t>floor((ymax + half_w) / pitch - 0.5)
        if cmin < 0: cmin = 0
        if rmin < 0: rmin = 0
        if cmax > h - 1: cmax = h - 1
        if rmax > h - 1: rmax = h - 1
        for r in range(rmin, rmax + 1):
            py = -half_w + (r + 0.5) * pitch
            for c in range(cmin, cmax + 1):
                px = -half_w + (c + 0.5) * pitch
                w0 = (x1 - px) * (y2 - py) - (y1 - py) * (x2 - px)
                if w0 < 0.0:
                    continue
                w1 = (x2 - px) * (y0 - py) - (y2 - py) * (x0 - px)
                if w1 < 0.0:
                    continue
                w2 = (x0 - px) * (y1 - py) - (y0 - py) * (x1 - px)
                if w2 < 0.0:
                    continue
                d = (w0 * d0 + w1 * d1 + w2 * d2) / area2
                if d < depth[r, c] or (d == depth[r, c] and tie_arr[t] < tie_grid[r, c]):
                    depth[r, c] = d
                    tie_grid[r, c] = tie_arr[t]
                    tri_idx[r, c] = <cnp.int32_t>t
    return tri_idx, depth


def raycast_first_hit(origins, direction, bvh, double t_min=1e-9):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] o = np.ascontiguousarray(origins, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dvec = np.ascontiguousarray(direction, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=3] tv = np.ascontiguousarray(bvh.tv, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] bmin = np.ascontiguousarray(bvh.bmin, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] bmax = np.ascontiguousarray(bvh.bmax, dtype=np.float64)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] left = np.ascontiguousarray(bvh.left, dtype=np.int32)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] right = np.ascontiguousarray(bvh.right, dtype=np.int32)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] start = np.ascontiguousarray(bvh.start, dtype=np.int32)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] count = np.ascontiguousarray(bvh.count, dtype=np.int32)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] order = np.ascontiguousarray(bvh.tri_order, dtype=np.int32)

    cdef Py_ssize_t nrays = o.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] t_out = np.full(nrays, np.inf, dtype=np.float64)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] tri_out = np.full(nrays, -1, dtype=np.int32)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] front_out = np.zeros(nrays, dtype=np.uint8)
    if tv.shape[0] == 0 or nrays == 0:
        return t_out, tri_out, front_out

    cdef double dx = dvec[0], dy = dvec[1], dz = dvec[2]
    cdef cnp.ndarray[cnp.int32_t, ndim=1] stack = np.zeros(2 * bmin.shape[0] + 2, dtype=np.int32)
    cdef Py_ssize_t sp, r, k, ti, node
    cdef double ox, oy, oz
    cdef double best_t, e1x, e1y, e1z, e2x, e2y, e2z
    cdef double px_, py_, pz_, det, inv_det, tx, ty, tz, u, vv, qx, qy, qz, thit
    cdef int best_tri, best_front, front
    cdef double t0, t1_, lo, hi, inv, tmpd

    for r in range(nrays):
        ox = o[r, 0]; oy = o[r, 1]; oz = o[r, 2]
        best_t = INFINITY
        best_tri = -1
        best_front = 0
        sp = 0
        stack[sp] = 0
        sp += 1
        while sp > 0:
            sp -= 1
            node = stack[sp]
            # slab test for [t0, t1_] overlap with (t_min, best_t]
            t0 = -INFINITY
            t1_ = INFINITY
            if fabs(dx) < 1e-300:
                if ox < bmin[node, 0] or ox > bmax[node, 0]:
                    continue
            else:
                inv = 1.0 / dx
                lo = (bmin[node, 0] - ox) * inv
                hi = (bmax[node, 0] - ox) * inv
                if lo > hi: tmpd = lo; lo = hi; hi = tmpd
                if lo > t0: t0 = lo
                if hi < t1_: t1_ = hi
            if fabs(dy) < 1e-300:
                if oy < bmin[node, 1] or oy > bmax[node, 1]:
                    continue
            else:
                inv = 1.0 / dy
                lo = (bmin[node, 1] - oy) * inv
                hi = (bmax[node, 1] - oy) * inv
                if lo > hi: tmpd = lo; lo = hi; hi = tmpd
                if lo > t0: t0 = lo
                if hi < t1_: t1_ = hi
            if fabs(dz) < 1e-300:
                if oz < bmin[node, 2] or oz > bmax[node, 2]:
                    continue
            else:
                inv = 1.0 / dz
                lo = (bmin[node, 2] - oz) * inv
                hi = (bmax[node, 2] - oz) * inv
                if lo > hi: tmpd = lo; lo = hi; hi = tmpd
                if lo > t0: t0 = lo
                if hi < t1_: t1_ = hi
            if t0 > t1_ or t0 > best_t or t1_ < t_min:
                continue
            if count[node] > 0:
                for k in range(start[node], start[node] + count[node]):
                    ti = order[k]
                    e1x = tv[ti, 1, 0] - tv[ti, 0, 0]
                    e1y = tv[ti, 1, 1] - tv[ti, 0, 1]
                    e1z = tv[ti, 1, 2] - tv[ti, 0, 2]
                    e2x = tv[ti, 2, 0] - tv[ti, 0, 0]
                    e2y = tv[ti, 2, 1] - tv[ti, 0, 1]
                    e2z = tv[ti, 2, 2] - tv[ti, 0, 2]
                    px_ = dy * e2z - dz * e2y
                    py_ = dz * e2x - dx * e2z
                    pz_ = dx * e2y - dy * e2x
                    det = e1x * px_ + e1y * py_ + e1z * pz_
                    if fabs(det) <= 1e-14:
                        continue
                    inv_det = 1.0 / det
                    tx = ox - tv[ti, 0, 0]
                    ty = oy - tv[ti, 0, 1]
                    tz = oz - tv[ti, 0, 2]
                    u = (tx * px_ + ty * py_ + tz * pz_) * inv_det
                    if u < -1e-12:
                        continue
                    qx = ty * e1z - tz * e1y
                    qy = tz * e1x - tx * e1z
                    qz = tx * e1y - ty * e1x
                    vv = (dx * qx + dy * qy + dz * qz) * inv_det
                    if vv < -1e-12 or u + vv > 1.0 + 1e-12:
                        continue
                    thit = (qx * e2x + qy * e2y + qz * e2z) * inv_det
                    if thit <= t_min:
                        continue
                    front = 1 if det > 0 else 0
                    if (thit < best_t
                            or (thit == best_t and front > best_front)
                            or (thit == best_t and front == best_front and ti < best_tri)):
                        best_t = thit
                        best_tri = <int>ti
                        best_front = front
            else:
                stack[sp] = left[node]
                sp += 1
                stack[sp] = right[node]
                sp += 1
        t_out[r] = best_t
        tri_out[r] = best_tri
        front_out[r] = <cnp.uint8_t>best_front
    return t_out, tri_out, front_out


cdef double _point_tri_dist2(double px, double py, double pz,
                             double ax, double ay, double az,
                             double bx, double by, double bz,
                             double cx, double cy, double cz) nogil:
    """Squared distance, mirroring the region order of the numpy backend."""
    cdef double abx = bx - ax, aby = by - ay, abz = bz - az
    cdef double acx = cx - ax, acy = cy - ay, acz = cz - az
    cdef double apx = px - ax, apy = py - ay, apz = pz - az
    cdef double d1 = abx * apx + aby * apy + abz * apz
    cdef double d2 = acx * apx + acy * apy + acz * apz
    cdef double qx, qy, qz, t, v, w, den
    if d1 <= 0.0 and d2 <= 0.0:
        return apx * apx + apy * apy + apz * apz
    cdef double bpx = px - bx, bpy = py - by, bpz = pz - bz
    cdef double d3 = abx * bpx + aby * bpy + abz * bpz
    cdef double d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        return bpx * bpx + bpy * bpy + bpz * bpz
    cdef double vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        t = d1 / (d1 - d3) if d1 != d3 else 0.0
        qx = ax + t * abx - px; qy = ay + t * aby - py; qz = az + t * abz - pz
        return qx * qx + qy * qy + qz * qz
    cdef double cpx = px - cx, cpy = py - cy, cpz = pz - cz
    cdef double d5 = abx * cpx + aby * cpy + abz * cpz
    cdef double d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        return cpx * cpx + cpy * cpy + cpz * cpz
    cdef double vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        t = d2 / (d2 - d6) if d2 != d6 else 0.0
        qx = ax + t * acx - px; qy = ay + t * acy - py; qz = az + t * acz - pz
        return qx * qx + qy * qy + qz * qz
    cdef double va = d3 * d6 - d5 * d4
    if va <= 0.0 and d4 - d3 >= 0.0 and d5 - d6 >= 0.0:
        den = (d4 - d3) + (d5 - d6)
        t = (d4 - d3) / den if den != 0.0 else 0.0
        qx = bx + t * (cx - bx) - px
        qy = by + t * (cy - by) - py
        qz = bz + t * (cz - bz) - pz
        return qx * qx + qy * qy + qz * qz
    den = va + vb + vc
    if den == 0.0:
        # degenerate: nearest vertex
        qx = apx * apx + apy * apy + apz * apz
        t = bpx * bpx + bpy * bpy + bpz * bpz
        if t < qx: qx = t
        t = cpx * cpx + cpy * cpy + cpz * cpz
        if t < qx: qx = t
        return qx
    v = vb / den
    w = vc / den
    qx = ax + v * abx + w * acx - px
    qy = ay + v * aby + w * acy - py
    qz = az + v * abz + w * acz - pz
    return qx * qx + qy * qy + qz * qz


def closest_tri(points, bvh, int chunk=256):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] p = np.ascontiguousarray(points, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=3] tv = np.ascontiguousarray(bvh.tv, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] bmin = np.ascontiguousarray(bvh.bmin, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] bmax = np.ascontiguousarray(bvh.bmax, dtype=np.float64)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] left = np.ascontiguousarray(bvh.left, dtype=np.int32)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] right = np.ascontiguousarray(bvh.right, dtype=np.int32)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] start = np.ascontiguousarray(bvh.start, dtype=np.int32)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] count = np.ascontiguousarray(bvh.count, dtype=np.int32)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] order = np.ascontiguousarray(bvh.tri_order, dtype=np.int32)

    cdef Py_ssize_t n = p.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dist = np.full(n, np.inf, dtype=np.float64)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] tri = np.full(n, -1, dtype=np.int32)
    if tv.shape[0] == 0 or n == 0:
        return dist, tri
    cdef cnp.ndarray[cnp.int32_t, ndim=1] stack = np.zeros(2 * bmin.shape[0] + 2, dtype=np.int32)
    cdef Py_ssize_t i, sp, node, k, ti
    cdef double px, py, pz, best, d2, lb, dx_, dy_, dz_
    cdef int best_tri
    for i in range(n):
        px = p[i, 0]; py = p[i, 1]; pz = p[i, 2]
        best = INFINITY
        best_tri = -1
        sp = 0
        stack[sp] = 0
        sp += 1
        while sp > 0:
            sp -= 1
            node = stack[sp]
            dx_ = 0.0
            if px < bmin[node, 0]: dx_ = bmin[node, 0] - px
            elif px > bmax[node, 0]: dx_ = px - bmax[node, 0]
            dy_ = 0.0
            if py < bmin[node, 1]: dy_ = bmin[node, 1] - py
            elif py > bmax[node, 1]: dy_ = py - bmax[node, 1]
            dz_ = 0.0
            if pz < bmin[node, 2]: dz_ = bmin[node, 2] - pz
            elif pz > bmax[node, 2]: dz_ = pz - bmax[node, 2]
            lb = dx_ * dx_ + dy_ * dy_ + dz_ * dz_
            if lb > best:
                continue
            if count[node] > 0:
                for k in range(start[node], start[node] + count[node]):
                    ti = order[k]
                    d2 = _point_tri_dist2(
                        px, py, pz,
                        tv[ti, 0, 0], tv[ti, 0, 1], tv[ti, 0, 2],
                        tv[ti, 1, 0], tv[ti, 1, 1], tv[ti, 1, 2],
                        tv[ti, 2, 0], tv[ti, 2, 1], tv[ti, 2, 2],
                    )
                    if d2 < best or (d2 == best and ti < best_tri):
                        best = d2
                        best_tri = <int>ti
            else:
                stack[sp] = left[node]
                sp += 1
                stack[sp] = right[node]
                sp += 1
        dist[i] = sqrt(best)
        tri[i] = best_tri
    return dist, tri
