import numpy as np
import pytest

from meshfill.mesh import (
    Mesh,
    MeshError,
    bfs_rings,
    boundary_vertices,
    connected_components,
    dumps_obj,
    exposed_boundary_loops,
    face_adjacency,
    largest_connected_component,
    load_mesh,
    loads_obj,
    normalize_unit_sphere,
    open_boundary_vertices,
    save_mesh,
    weld_patch,
)
from meshfill.synth import cube, quad_grid, random_mixed_mesh


def test_load_cube_obj(tmp_path):
    m = cube()
    p = tmp_path / "cube.obj"
    save_mesh(m, p)
    back = load_mesh(p)
    assert back.num_vertices == 8
    assert back.num_faces == 6
    assert all(len(f) == 4 for f in back.faces)


def test_load_rejects_degenerate_face():
    with pytest.raises(MeshError, match="degenerate face 0"):
        loads_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 1 2\n")


def test_load_rejects_arity_5():
    text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 2 2 0\nf 1 2 3 4 5\n"
    with pytest.raises(MeshError, match="arity 5"):
        loads_obj(text)


def test_load_reports_line_number():
    with pytest.raises(MeshError, match="line 2"):
        loads_obj("v 0 0 0\nv 1 0 x\n")


def test_face_slash_forms_and_negative_indices():
    text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1/1 2//2 -1\n"
    m = loads_obj(text)
    assert m.faces == [(0, 1, 2)]


def test_save_load_save_round_trip(tmp_path):
    m = random_mixed_mesh(seed=7)
    assert m.num_faces >= 9
    p1 = tmp_path / "a.obj"
    p2 = tmp_path / "b.obj"
    save_mesh(m, p1)
    save_mesh(load_mesh(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert b"\r" not in p1.read_bytes()


def test_normalize_pm2_cube():
    m = cube(size=4.0)  # corners at +/-2
    n, t = normalize_unit_sphere(m)
    assert np.isclose(np.linalg.norm(n.vertices, axis=1).max(), 1.0)
    assert np.isclose(t.scale, 1.0 / (2 * np.sqrt(3)))


def test_normalize_idempotent():
    m, _ = normalize_unit_sphere(cube())
    n, t = normalize_unit_sphere(m)
    assert np.allclose(t.center, 0.0, atol=1e-12)
    assert abs(t.scale - 1.0) < 1e-12


def test_normalize_round_trip_random():
    rng = np.random.default_rng(3)
    m = Mesh(rng.normal(size=(40, 3)) * 5 + 2, [(0, 1, 2)])
    n, t = normalize_unit_sphere(m)
    assert np.allclose(t.invert(n.vertices), m.vertices, atol=1e-12)


def test_normalize_zero_scale():
    m = Mesh(np.zeros((3, 3)), [(0, 1, 2)])
    with pytest.raises(MeshError, match="zero scale"):
        normalize_unit_sphere(m)


def test_bfs_rings_grid():
    g = quad_grid(3, 3)
    graph = face_adjacency(g)
    center = 4
    assert bfs_rings(graph, [center], 0) == {4}
    ring1 = bfs_rings(graph, [center], 1, include_seed=False)
    assert ring1 == {1, 3, 5, 7}  # edge-adjacent only
    assert bfs_rings(graph, [center], 2) == set(range(9))


def test_bfs_rings_monotone():
    m = random_mixed_mesh(seed=11)
    graph = face_adjacency(m)
    prev = set()
    for w in range(5):
        cur = bfs_rings(graph, [0], w)
        assert prev <= cur
        prev = cur


def test_bfs_rings_out_of_range():
    graph = face_adjacency(quad_grid(2, 2))
    with pytest.raises(MeshError):
        bfs_rings(graph, [99], 1)


def test_boundary_vertices_grid_center():
    g = quad_grid(3, 3)
    bv = boundary_vertices(g, [4])
    assert bv == set(g.faces[4])
    assert len(bv) == 4


def test_boundary_vertices_brute_force_random():
    rng = np.random.default_rng(5)
    for _ in range(50):
        m = random_mixed_mesh(seed=int(rng.integers(1 << 30)))
        k = int(rng.integers(1, m.num_faces))
        target = set(rng.choice(m.num_faces, size=k, replace=False).tolist())
        expected = set()
        for v in range(m.num_vertices):
            in_t = any(v in m.faces[f] for f in target)
            in_r = any(v in m.faces[f] for f in range(m.num_faces) if f not in target)
            if in_t and in_r:
                expected.add(v)
        assert boundary_vertices(m, target) == expected


def test_boundary_vertices_degenerate_sets():
    g = quad_grid(2, 2)
    assert boundary_vertices(g, range(g.num_faces)) == set()
    assert boundary_vertices(g, []) == set()


def test_largest_component_and_ties():
    g = quad_grid(5, 1)  # 5 faces in a row
    graph = face_adjacency(g)
    assert largest_connected_component(graph, {0, 1, 2, 3, 4}) == {0, 1, 2, 3, 4}
    # components {0,1} and {3,4}: equal size, tie broken by smallest face id
    assert largest_connected_component(graph, {0, 1, 3, 4}) == {0, 1}
    comps = connected_components(graph, {0, 2, 3, 4})
    assert comps[0] == {2, 3, 4} and comps[1] == {0}
    assert largest_connected_component(graph, set()) == set()


def test_adjacency_symmetric_and_bounded():
    m = random_mixed_mesh(seed=2)
    graph = face_adjacency(m)
    for f, nbrs in enumerate(graph.neighbors):
        assert len(nbrs) <= len(m.faces[f])
        for g_ in nbrs:
            assert f in graph.neighbors[g_]


def test_exposed_boundary_loops_cube_face():
    m = cube()
    loops = exposed_boundary_loops(m, [0])
    assert len(loops) == 1
    assert sorted(loops[0]) == sorted(m.faces[0])
    # loop follows the removed face's winding
    f = m.faces[0]
    k = loops[0].index(f[0])
    rot = loops[0][k:] + loops[0][:k]
    assert tuple(rot) == f


def test_open_boundary_vertices_grid():
    g = quad_grid(3, 3)
    inner = {5, 6, 9, 10}  # interior vertices of the 4x4 vertex lattice
    assert open_boundary_vertices(g) == set(range(g.num_vertices)) - inner


def test_weld_exact_and_displaced():
    g = quad_grid(2, 1, size=1.0)
    base = Mesh(g.vertices.copy(), [g.faces[0]])
    patch = g.submesh([1])
    merged, weld = weld_patch(base, patch, tol=1e-6)
    assert len(weld) == 2  # the two shared seam vertices
    assert merged.num_vertices == base.num_vertices + patch.num_vertices - 2
    patch2 = Mesh(patch.vertices + 2e-6, patch.faces)
    merged2, weld2 = weld_patch(base, patch2, tol=1e-6)
    assert weld2 == {}
    assert merged2.num_vertices == base.num_vertices + patch.num_vertices


def test_weld_warning_on_ambiguous_target():
    base = Mesh(
        np.array([[0, 0, 0], [1e-8, 0, 0], [1, 1, 0]]),
        [(0, 1, 2)],
    )
    patch = Mesh(np.array([[0, 0, 0], [5, 5, 0], [6, 5, 0]]), [(0, 1, 2)])
    with pytest.warns(UserWarning, match="welding to the nearest"):
        merged, weld = weld_patch(base, patch, tol=1e-6)
    assert weld[0] == 0  # nearest wins


def test_dumps_obj_formatting():
    m = Mesh(np.array([[0.123456789123, 1.0, -2.0]]), [])
    text = dumps_obj(m)
    assert text == "v 0.123456789 1 -2\n"
