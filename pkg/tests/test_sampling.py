import numpy as np
import pytest

from meshfill.mesh import Mesh, MeshError, triangulated
from meshfill.sampling import NnIndex, sample_points
from meshfill.synth import quad_grid


def test_sample_unit_square_mean():
    g = quad_grid(1, 1)
    s = sample_points(g, 10000, seed=0)
    assert np.abs(s.positions.mean(axis=0)[:2] - 0.5).max() < 0.02
    assert (s.source_face == 0).all()


def test_sample_single_triangle_point_inside():
    m = Mesh(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=float), [(0, 1, 2)])
    s = sample_points(m, 1, seed=3)
    p = s.positions[0]
    assert p[0] >= 0 and p[1] >= 0 and p[0] + p[1] <= 1 and p[2] == 0


def test_sample_area_ratio():
    verts = np.array([[0, 0, 0], [9, 0, 0], [0, 2, 0], [10, 0, 0], [10, 1, 0], [9, 1, 0]],
                     dtype=float)
    m = Mesh(verts, [(0, 1, 2), (3, 4, 5)])  # areas 9 : 0.5 -> ratio 18
    areas = {0: 9.0, 1: 0.5}
    s = sample_points(m, 10000, seed=1)
    n0 = int((s.source_face == 0).sum())
    n1 = int((s.source_face == 1).sum())
    ratio = n0 / max(1, n1)
    expect = areas[0] / areas[1]
    assert expect * 0.8 < ratio < expect * 1.25


def test_sample_quads_split_and_on_face():
    g = quad_grid(3, 2)
    s = sample_points(g, 500, seed=9)
    tris, src = triangulated(g)
    # every point reconstructs on one triangle of its source face
    for p, f in zip(s.positions, s.source_face):
        ok = False
        for t in np.nonzero(src == f)[0]:
            a, b, c = g.vertices[tris[t]]
            n = np.cross(b - a, c - a)
            if abs(np.dot(p - a, n)) < 1e-9:
                u = np.linalg.solve(
                    np.stack([b - a, c - a, n], axis=1), p - a
                )
                if u[0] >= -1e-9 and u[1] >= -1e-9 and u[0] + u[1] <= 1 + 1e-9:
                    ok = True
                    break
        assert ok


def test_sample_determinism_and_errors():
    g = quad_grid(2, 2)
    a = sample_points(g, 64, seed=5)
    b = sample_points(g, 64, seed=5)
    assert np.array_equal(a.positions, b.positions)
    assert np.array_equal(a.source_face, b.source_face)
    with pytest.raises(MeshError):
        sample_points(g, 0)
    degenerate = Mesh(np.zeros((3, 3)) + [[0, 0, 0], [0, 0, 0], [0, 0, 0]], [(0, 1, 2)])
    with pytest.raises(MeshError, match="zero total area"):
        sample_points(degenerate, 5)


def test_nnindex_matches_linear_scan():
    rng = np.random.default_rng(2)
    pts = rng.normal(size=(300, 3))
    idx = NnIndex(pts)
    for _ in range(1000):
        q = rng.normal(size=3) * 1.5
        d, i = idx.query(q)
        dists = np.linalg.norm(pts - q, axis=1)
        assert i == int(np.argmin(dists))  # argmin takes the smallest index on ties
        assert abs(d - dists.min()) < 1e-12


def test_nnindex_exact_tie_smallest_index():
    pts = np.array([[1.0, 0, 0], [-1.0, 0, 0], [1.0, 0, 0]])
    idx = NnIndex(pts)
    d, i = idx.query([0.0, 0.0, 0.0])
    assert d == 1.0 and i == 0


def test_nnindex_radius_sorted():
    pts = np.array([[0.0, 0, 0], [0.5, 0, 0], [2.0, 0, 0]])
    idx = NnIndex(pts)
    assert idx.radius([0.1, 0, 0], 1.0) == [0, 1]
