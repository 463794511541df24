import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poseval.errors import MeshFormatError
from poseval.geometry import (
    RigidTransform,
    TriangleMesh,
    compose,
    is_rotation_matrix,
    load_mesh,
    max_pairwise_distance,
    nearest_rotation,
    rotation_about_axis,
    save_mesh_ply,
    transform_points,
)

from helpers import random_pose, random_rotation

UNIT_CUBE_PLY = """ply
format ascii 1.0
comment unit cube
element vertex 8
property float x
property float y
property float z
element face 12
property list uchar int vertex_indices
end_header
0 0 0
1 0 0
1 1 0
0 1 0
0 0 1
1 0 1
1 1 1
0 1 1
3 0 1 2
3 0 2 3
3 4 6 5
3 4 7 6
3 0 4 5
3 0 5 1
3 3 2 6
3 3 6 7
3 0 3 7
3 0 7 4
3 1 5 6
3 1 6 2
"""

TRIANGLE_PLY = """ply
format ascii 1.0
element vertex 3
property float x
property float y
property float z
element face 1
property list uchar int vertex_indices
end_header
0 0 0
3 0 0
0 4 0
3 0 1 2
"""


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoadMesh:
    def test_unit_cube(self, tmp_path):
        mesh = load_mesh(_write(tmp_path, "cube.ply", UNIT_CUBE_PLY))
        assert len(mesh.vertices) == 8
        assert len(mesh.triangles) == 12
        assert mesh.diameter == pytest.approx(np.sqrt(3.0), abs=1e-12)
        # vertex order preserved from file
        assert np.array_equal(mesh.vertices[1], [1.0, 0.0, 0.0])

    def test_3_4_5_triangle(self, tmp_path):
        mesh = load_mesh(_write(tmp_path, "tri.ply", TRIANGLE_PLY))
        assert mesh.diameter == 5.0

    def test_random_mesh_diameter_matches_brute_force(self, tmp_path):
        rng = np.random.default_rng(7)
        verts = rng.uniform(-50.0, 50.0, size=(50, 3))
        tris = [(i, (i + 1) % 50, (i + 2) % 50) for i in range(48)]
        mesh = TriangleMesh(verts, tris)
        save_mesh_ply(tmp_path / "r.ply", mesh)
        loaded = load_mesh(tmp_path / "r.ply")
        # O(n^2) pairwise scan oracle
        best = 0.0
        for i in range(len(loaded.vertices)):
            for j in range(i + 1, len(loaded.vertices)):
                best = max(best, float(np.linalg.norm(
                    loaded.vertices[i] - loaded.vertices[j]
                )))
        assert loaded.diameter == pytest.approx(best, abs=1e-12)

    def test_binary_roundtrip(self, tmp_path):
        rng = np.random.default_rng(3)
        verts = rng.uniform(-10, 10, size=(20, 3)).astype(np.float32)
        tris = [(i, (i + 1) % 20, (i + 3) % 20) for i in range(15)]
        mesh = TriangleMesh(verts, tris)
        save_mesh_ply(tmp_path / "bin.ply", mesh, binary=True)
        loaded = load_mesh(tmp_path / "bin.ply")
        assert np.allclose(loaded.vertices, mesh.vertices, atol=1e-6)
        assert np.array_equal(loaded.triangles, mesh.triangles)

    def test_binary_little_endian_literal(self, tmp_path):
        import struct

        header = (
            b"ply\nformat binary_little_endian 1.0\n"
            b"element vertex 3\n"
            b"property float x\nproperty float y\nproperty float z\n"
            b"element face 1\nproperty list uchar int vertex_indices\n"
            b"end_header\n"
        )
        body = b"".join(
            struct.pack("<3f", *v) for v in [(0, 0, 0), (3, 0, 0), (0, 4, 0)]
        ) + struct.pack("<B3i", 3, 0, 1, 2)
        path = tmp_path / "lit.ply"
        path.write_bytes(header + body)
        mesh = load_mesh(path)
        assert mesh.diameter == 5.0

    def test_big_endian_rejected(self, tmp_path):
        text = UNIT_CUBE_PLY.replace("format ascii 1.0", "format binary_big_endian 1.0")
        with pytest.raises(MeshFormatError, match="big-endian"):
            load_mesh(_write(tmp_path, "big.ply", text))

    def test_malformed_header(self, tmp_path):
        with pytest.raises(MeshFormatError):
            load_mesh(_write(tmp_path, "bad.ply", "not a ply\n"))
        with pytest.raises(MeshFormatError):
            load_mesh(_write(tmp_path, "bad2.ply", "ply\nformat ascii 1.0\nwhatever\n"))

    def test_quad_fan_triangulation(self, tmp_path):
        text = """ply
format ascii 1.0
element vertex 4
property float x
property float y
property float z
element face 1
property list uchar int vertex_indices
end_header
0 0 0
1 0 0
1 1 0
0 1 0
4 0 1 2 3
"""
        mesh = load_mesh(_write(tmp_path, "quad.ply", text))
        assert np.array_equal(mesh.triangles, [(0, 1, 2), (0, 2, 3)])

    def test_degenerate_face_rejected(self, tmp_path):
        text = TRIANGLE_PLY.replace("3 0 1 2", "2 0 1")
        with pytest.raises(MeshFormatError, match="at least 3"):
            load_mesh(_write(tmp_path, "deg.ply", text))

    def test_out_of_range_index_rejected(self, tmp_path):
        text = TRIANGLE_PLY.replace("3 0 1 2", "3 0 1 7")
        with pytest.raises(MeshFormatError, match="references vertex"):
            load_mesh(_write(tmp_path, "oob.ply", text))

    def test_color_properties_ignored(self, tmp_path):
        text = """ply
format ascii 1.0
element vertex 3
property float x
property float y
property float z
property uchar red
property uchar green
property uchar blue
element face 1
property list uchar int vertex_indices
end_header
0 0 0 255 0 0
3 0 0 0 255 0
0 4 0 0 0 255
3 0 1 2
"""
        mesh = load_mesh(_write(tmp_path, "color.ply", text))
        assert mesh.diameter == 5.0


class TestRigidTransform:
    def test_identity_compose(self):
        identity = RigidTransform.identity()
        assert compose(identity, identity).is_close(identity)

    def test_inverse_composes_to_identity(self):
        rng = np.random.default_rng(11)
        t = random_pose(rng)
        assert compose(t, t.inverse()).is_close(RigidTransform.identity(), tol=1e-9)
        assert compose(t.inverse(), t).is_close(RigidTransform.identity(), tol=1e-9)

    def test_compose_matches_sequential_application(self):
        rng = np.random.default_rng(12)
        a, b = random_pose(rng), random_pose(rng)
        pts = rng.uniform(-100, 100, size=(100, 3))
        assert np.allclose(
            compose(a, b).apply(pts), a.apply(b.apply(pts)), atol=1e-9
        )

    def test_compose_associative(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            a, b, c = (random_pose(rng) for _ in range(3))
            left = compose(compose(a, b), c)
            right = compose(a, compose(b, c))
            assert left.is_close(right, tol=1e-9)

    def test_reflection_rejected(self):
        reflection = np.diag([1.0, 1.0, -1.0])
        assert not is_rotation_matrix(reflection)
        with pytest.raises(ValueError):
            RigidTransform(reflection, np.zeros(3))

    def test_nearest_rotation_projects(self):
        rng = np.random.default_rng(5)
        r = random_rotation(rng)
        noisy = r + rng.normal(scale=1e-4, size=(3, 3))
        fixed = nearest_rotation(noisy)
        assert is_rotation_matrix(fixed)
        assert np.abs(fixed - r).max() < 1e-3


class TestTransformPoints:
    def test_identity(self):
        pts = np.array([[1.0, 2.0, 3.0], [-4.0, 0.0, 2.0]])
        assert np.array_equal(transform_points(RigidTransform.identity(), pts), pts)

    def test_pure_translation(self):
        t = RigidTransform(np.eye(3), (1.0, 2.0, 3.0))
        assert np.array_equal(t.apply([[0.0, 0.0, 0.0]]), [[1.0, 2.0, 3.0]])

    def test_z_rotation(self):
        t = RigidTransform(rotation_about_axis((0, 0, 1), np.pi / 2), np.zeros(3))
        out = t.apply([[1.0, 0.0, 0.0]])
        assert np.allclose(out, [[0.0, 1.0, 0.0]], atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_diameter_invariant_under_rigid_motion(seed):
    rng = np.random.default_rng(seed)
    verts = rng.uniform(-100, 100, size=(12, 3))
    mesh = TriangleMesh(verts, [(0, 1, 2)])
    moved = mesh.transformed(random_pose(rng))
    assert max_pairwise_distance(moved.vertices) == pytest.approx(
        mesh.diameter, abs=1e-9
    )


def test_mesh_validation():
    with pytest.raises(ValueError, match="at least 3"):
        TriangleMesh([[0, 0, 0], [1, 0, 0]], [])
    with pytest.raises(ValueError, match="out of range"):
        TriangleMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [(0, 1, 3)])


def test_diameter_uses_hull_beyond_exact_limit():
    # Above the exact-scan limit the farthest pair comes from convex-hull
    # vertices; a sphere cloud with an explicit antipodal pair pins the
    # expected value.
    rng = np.random.default_rng(21)
    directions = rng.normal(size=(21000, 3))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    points = 100.0 * directions * rng.uniform(0.2, 0.999, size=(21000, 1))
    points[0] = (100.0, 0.0, 0.0)
    points[1] = (-100.0, 0.0, 0.0)
    assert max_pairwise_distance(points) == pytest.approx(200.0, abs=1e-9)
