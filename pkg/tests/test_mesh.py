import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdgcnn import shapes
from mdgcnn.errors import DegenerateFace, MeshError, NonManifold, ParseError
from mdgcnn.mesh import TriangleMesh, load_mesh, order_one_ring, vertex_areas, write_off, write_ply


def _corner_angle_sum(mesh, v):
    ring = mesh.rings[v]
    e = mesh.positions[ring.neighbors] - mesh.positions[v]
    e /= np.linalg.norm(e, axis=1, keepdims=True)
    nxt = np.roll(e, -1, axis=0)
    if ring.is_boundary:
        e, nxt = e[:-1], nxt[:-1]
    return np.arccos(np.clip(np.einsum("ij,ij->i", e, nxt), -1, 1)).sum()


def test_single_triangle_off(tmp_path):
    p = tmp_path / "tri.off"
    p.write_text("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n")
    m = load_mesh(p)
    assert (m.n_vertices, m.n_faces) == (3, 1)
    assert len(m.boundary_edges) == 3
    assert all(r.is_boundary for r in m.rings)


def test_icosahedron_roundtrip(tmp_path):
    v, f = shapes.icosahedron_arrays()
    m = TriangleMesh(v, f)
    write_off(tmp_path / "ico.off", m)
    m2 = load_mesh(tmp_path / "ico.off")
    assert (m2.n_vertices, m2.n_faces) == (12, 20)
    assert np.all(m2.edge_faces >= 0)
    assert m2.content_hash() == m.content_hash()


def test_obj_reader(tmp_path):
    p = tmp_path / "sq.obj"
    p.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3\nf 1/1 3/3 4/4\n")
    m = load_mesh(p)
    assert m.n_faces == 2 and m.faces[1].tolist() == [0, 2, 3]


def test_out_of_range_index(tmp_path):
    p = tmp_path / "bad.off"
    p.write_text("OFF\n4 1 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 1 999\n")
    with pytest.raises(ParseError):
        load_mesh(p)


def test_malformed_file(tmp_path):
    p = tmp_path / "bad.off"
    p.write_text("OFF\n3 1 0\n0 0 zero\n")
    with pytest.raises(ParseError):
        load_mesh(p)


def test_invariant_violations():
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 1]], float)
    with pytest.raises(DegenerateFace):
        TriangleMesh(v, [[0, 0, 1]])
    with pytest.raises(DegenerateFace):
        TriangleMesh(np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0]], float), [[0, 1, 2]])
    with pytest.raises(NonManifold):
        TriangleMesh(v, [[0, 1, 2], [0, 1, 3], [0, 1, 4]])
    with pytest.raises(MeshError):
        TriangleMesh(v, [[0, 1, 7]])


def test_vertex_areas_small_cases():
    tri = TriangleMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
    np.testing.assert_allclose(vertex_areas(tri), 0.5)
    sq = TriangleMesh([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], [[0, 1, 2], [0, 2, 3]])
    np.testing.assert_allclose(vertex_areas(sq), [1.0, 0.5, 1.0, 0.5])


def test_vertex_areas_sum(sphere3):
    a = vertex_areas(sphere3)
    assert np.all(a > 0)
    assert abs(a.sum() - 3 * sphere3.face_areas.sum()) <= 1e-9 * a.sum()


def test_grid_interior_ring_is_flat(grid20):
    v = 10 * 20 + 10
    ring = order_one_ring(grid20, v)
    assert len(ring.neighbors) == 6 and not ring.is_boundary
    np.testing.assert_allclose(ring.alphas, ring.raw_angles, atol=1e-12)
    assert ring.neighbors[0] == v - 21  # lowest index neighbor, the (row-1, col-1) corner


def test_cube_corner_scaled():
    m = shapes.cube()
    ring = m.rings[0]
    assert _corner_angle_sum(m, 0) == pytest.approx(1.5 * np.pi)
    np.testing.assert_allclose(ring.alphas, ring.raw_angles * 4 / 3, atol=1e-12)
    assert ring.alphas.sum() == pytest.approx(2 * np.pi, abs=1e-9)


def test_interior_angles_sum_to_two_pi(sphere3):
    for r in sphere3.rings:
        assert abs(r.alphas.sum() - 2 * np.pi) < 1e-9


def test_ring_consecutive_neighbors_share_face(sphere2, grid20):
    for mesh in (sphere2, grid20):
        faces = {frozenset(f) for f in mesh.faces.tolist()}
        for r in mesh.rings:
            nb = r.neighbors.tolist()
            pairs = zip(nb, nb[1:] + ([] if r.is_boundary else nb[:1]))
            assert all(frozenset((r.center, a, b)) in faces for a, b in pairs)


def test_orientation_is_consistent(sphere2):
    # every interior edge is traversed once in each direction
    f = sphere2.oriented_faces
    half = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    assert len({tuple(h) for h in half.tolist()}) == len(half)
    c = sphere2.positions[f].mean(axis=1)
    assert np.all(np.einsum("ij,ij->i", sphere2.face_normals, c) > 0)


def test_inconsistent_input_orientation_is_repaired():
    v, f = shapes.icosahedron_arrays()
    f = f.copy()
    f[::3] = f[::3, ::-1]
    m = TriangleMesh(v, f)
    side = np.sign(np.einsum("ij,ij->i", m.face_normals, m.positions[m.oriented_faces].mean(1)))
    assert abs(side.sum()) == len(side)


_SPHERE = shapes.icosphere(2)


@settings(max_examples=25, deadline=None)
@given(v=st.integers(0, 161), shift=st.integers(1, 5))
def test_ring_rotation_of_listing(v, shift):
    mesh = _SPHERE
    ring = mesh.rings[v]
    k = shift % len(ring.neighbors)
    other = order_one_ring(mesh, v, start=ring.neighbors[k])
    np.testing.assert_array_equal(other.neighbors, np.roll(ring.neighbors, -k))
    np.testing.assert_allclose(other.alphas, np.roll(ring.alphas, -k), atol=1e-12)


def test_chart_angle_roundtrip(sphere2):
    for v in (0, 17, 100):
        for a in np.linspace(0, 2 * np.pi, 7, endpoint=False):
            d = sphere2.chart_direction(v, a)
            assert abs((sphere2.chart_angle(v, d) - a + np.pi) % (2 * np.pi) - np.pi) < 1e-9
        assert sphere2.chart_angle(v, sphere2.reference_direction(v)) == pytest.approx(0.0, abs=1e-12)


def test_write_ply(tmp_path, sphere2):
    colors = np.tile([[255, 0, 10]], (sphere2.n_vertices, 1))
    write_ply(tmp_path / "s.ply", sphere2, colors)
    text = (tmp_path / "s.ply").read_text().splitlines()
    assert "property uchar red" in text
    head = text.index("end_header")
    assert text[head + 1].endswith("255 0 10")
    assert len(text) == head + 1 + sphere2.n_vertices + sphere2.n_faces
