"""Core geometric types: rigid transforms, triangle meshes, pinhole cameras.

All lengths are in millimeters. Objects are immutable after construction and
safe to share across concurrent workers.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull

from .errors import MeshFormatError

ROTATION_TOL = 1e-6

# Above this vertex count the diameter is computed on convex-hull vertices
# only (still exact: the farthest pair is always a pair of hull vertices).
EXACT_DIAMETER_LIMIT = 20000


def is_rotation_matrix(matrix, tol=ROTATION_TOL):
    """True if ``matrix`` is orthonormal with determinant +1 within ``tol``."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.shape != (3, 3) or not np.all(np.isfinite(m)):
        return False
    if np.abs(m @ m.T - np.eye(3)).max() > tol:
        return False
    return abs(np.linalg.det(m) - 1.0) <= tol


def nearest_rotation(matrix):
    """Project a near-orthonormal matrix onto the closest proper rotation.

    :param matrix: 3x3 ndarray with positive determinant.
    :return: 3x3 rotation matrix (orthonormal, det +1).
    """
    m = np.asarray(matrix, dtype=np.float64)
    u, _, vt = np.linalg.svd(m)
    r = u @ vt
    if np.linalg.det(r) < 0:
        u[:, -1] = -u[:, -1]
        r = u @ vt
    return r


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Pose P = [R|t]: a 3x3 rotation plus a translation in millimeters."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.array(self.rotation, dtype=np.float64)
        t = np.array(self.translation, dtype=np.float64).reshape(3)
        if not is_rotation_matrix(r):
            raise ValueError(
                "rotation must be orthonormal with det +1 within "
                f"{ROTATION_TOL:g}"
            )
        if not np.all(np.isfinite(t)):
            raise ValueError("translation must be finite")
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, matrix):
        """Build from a 4x4 (or 3x4) homogeneous matrix."""
        m = np.asarray(matrix, dtype=np.float64)
        if m.shape not in ((4, 4), (3, 4)):
            raise ValueError(f"expected 4x4 or 3x4 matrix, got {m.shape}")
        return cls(m[:3, :3], m[:3, 3])

    def matrix(self):
        """The 4x4 homogeneous matrix of this transform."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def compose(self, other):
        """Transform applying ``other`` first, then ``self``."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self):
        rt = self.rotation.T
        return RigidTransform(rt, -(rt @ self.translation))

    def apply(self, points):
        """Map an (n, 3) array of points: x -> R x + t."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def is_close(self, other, tol=1e-9):
        return (
            np.abs(self.rotation - other.rotation).max() <= tol
            and np.abs(self.translation - other.translation).max() <= tol
        )

    def __repr__(self):
        r = np.array2string(self.rotation, precision=6, suppress_small=True)
        t = np.array2string(self.translation, precision=6)
        return f"RigidTransform(rotation={r}, translation={t})"


def compose(a, b):
    """Composition (a o b)(x) = a(b(x))."""
    return a.compose(b)


def transform_points(transform, points):
    """Apply a rigid transform to each point: R x + t."""
    return transform.apply(points)


def rotation_about_axis(axis, angle):
    """Rodrigues rotation matrix for a unit ``axis`` and ``angle`` [rad]."""
    a = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(a)
    if n == 0:
        raise ValueError("axis must be non-zero")
    a = a / n
    c, s = np.cos(angle), np.sin(angle)
    cross = np.array(
        [[0.0, -a[2], a[1]], [a[2], 0.0, -a[0]], [-a[1], a[0], 0.0]]
    )
    return c * np.eye(3) + s * cross + (1.0 - c) * np.outer(a, a)


def rotation_about_point(axis, angle, center):
    """Rigid transform rotating about an axis through ``center``."""
    r = rotation_about_axis(axis, angle)
    center = np.asarray(center, dtype=np.float64)
    return RigidTransform(r, center - r @ center)


def rotation_angle_between(r_a, r_b):
    """Geodesic angle [rad] between two rotation matrices."""
    cos = 0.5 * (np.trace(np.asarray(r_a) @ np.asarray(r_b).T) - 1.0)
    return float(np.arccos(np.clip(cos, -1.0, 1.0)))


def max_pairwise_distance(points):
    """Largest Euclidean distance between any pair of points (exact).

    Brute force for small inputs; for large inputs the scan is restricted to
    convex-hull vertices, which always contain the farthest pair.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError("expected an (n, 3) array")
    if len(pts) < 2:
        return 0.0
    if len(pts) > EXACT_DIAMETER_LIMIT:
        try:
            pts = pts[ConvexHull(pts).vertices]
        except Exception:
            pass  # degenerate (coplanar etc.); fall through to full scan
    best = 0.0
    block = 2048
    for i in range(0, len(pts), block):
        chunk = pts[i : i + block]
        d2 = ((chunk[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        best = max(best, float(d2.max()))
    return float(np.sqrt(best))


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Object model: vertices [mm], triangle indices, precomputed diameter."""

    vertices: np.ndarray
    triangles: np.ndarray
    diameter: float = None

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64)
        t = np.array(self.triangles, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValueError("vertices must be an (n, 3) array")
        if len(v) < 3:
            raise ValueError("a mesh needs at least 3 vertices")
        if not np.all(np.isfinite(v)):
            raise ValueError("vertices must be finite")
        if t.ndim != 2 or t.shape[1] != 3:
            raise ValueError("triangles must be an (m, 3) array")
        if len(t) and (t.min() < 0 or t.max() >= len(v)):
            raise ValueError("triangle index out of range")
        v.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        if self.diameter is None:
            object.__setattr__(self, "diameter", max_pairwise_distance(v))
        else:
            object.__setattr__(self, "diameter", float(self.diameter))

    @property
    def centroid(self):
        return self.vertices.mean(axis=0)

    def transformed(self, transform):
        """A copy with vertices mapped by ``transform`` (diameter is kept:
        rigid motions preserve pairwise distances)."""
        return TriangleMesh(
            transform.apply(self.vertices), self.triangles, self.diameter
        )


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole camera: u = fx X/Z + cx, v = fy Y/Z + cy. Sizes in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx == 0 or self.fy == 0:
            raise ValueError("degenerate camera: fx and fy must be non-zero")
        if self.fx < 0 or self.fy < 0:
            raise ValueError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")

    @property
    def matrix(self):
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


# ---------------------------------------------------------------------------
# PLY reading / writing
# ---------------------------------------------------------------------------

_PLY_DTYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


class _PlyProperty:
    def __init__(self, name, kind, count_kind=None):
        self.name = name
        self.kind = kind            # numpy dtype char code, little-endian
        self.count_kind = count_kind  # set for list properties

    @property
    def is_list(self):
        return self.count_kind is not None


class _PlyElement:
    def __init__(self, name, count):
        self.name = name
        self.count = count
        self.properties = []


def _parse_ply_header(fh):
    def next_line():
        raw = fh.readline()
        if not raw:
            raise MeshFormatError("unexpected end of file in PLY header")
        return raw.decode("ascii", errors="replace").strip()

    if next_line() != "ply":
        raise MeshFormatError("not a PLY file (missing 'ply' magic)")
    fmt = None
    elements = []
    while True:
        line = next_line()
        if not line or line.startswith("comment") or line.startswith("obj_info"):
            continue
        parts = line.split()
        if parts[0] == "format":
            if len(parts) < 2:
                raise MeshFormatError("malformed 'format' line")
            fmt = parts[1]
            if fmt == "binary_big_endian":
                raise MeshFormatError(
                    "big-endian PLY files are not supported; convert to "
                    "ascii or binary_little_endian"
                )
            if fmt not in ("ascii", "binary_little_endian"):
                raise MeshFormatError(f"unknown PLY format '{fmt}'")
        elif parts[0] == "element":
            if len(parts) != 3:
                raise MeshFormatError(f"malformed element line: '{line}'")
            try:
                count = int(parts[2])
            except ValueError:
                raise MeshFormatError(f"bad element count in '{line}'") from None
            elements.append(_PlyElement(parts[1], count))
        elif parts[0] == "property":
            if not elements:
                raise MeshFormatError("property before any element")
            if parts[1] == "list":
                if len(parts) != 5:
                    raise MeshFormatError(f"malformed list property: '{line}'")
                count_kind = _PLY_DTYPES.get(parts[2])
                item_kind = _PLY_DTYPES.get(parts[3])
                if count_kind is None or item_kind is None:
                    raise MeshFormatError(f"unknown type in '{line}'")
                elements[-1].properties.append(
                    _PlyProperty(parts[4], item_kind, count_kind)
                )
            else:
                if len(parts) != 3:
                    raise MeshFormatError(f"malformed property line: '{line}'")
                kind = _PLY_DTYPES.get(parts[1])
                if kind is None:
                    raise MeshFormatError(f"unknown property type in '{line}'")
                elements[-1].properties.append(_PlyProperty(parts[2], kind))
        elif parts[0] == "end_header":
            break
        else:
            raise MeshFormatError(f"unexpected header line: '{line}'")
    if fmt is None:
        raise MeshFormatError("PLY header has no 'format' line")
    return fmt, elements


def _ascii_tokens(fh):
    for raw in fh:
        for tok in raw.split():
            yield tok.decode("ascii")


def _read_ascii_elements(fh, elements):
    """Returns {element name: (scalar columns dict, list-property rows dict)}."""
    tokens = _ascii_tokens(fh)
    out = {}
    try:
        for elem in elements:
            scalars = {p.name: [] for p in elem.properties if not p.is_list}
            lists = {p.name: [] for p in elem.properties if p.is_list}
            for _ in range(elem.count):
                for prop in elem.properties:
                    if prop.is_list:
                        n = int(next(tokens))
                        lists[prop.name].append(
                            [float(next(tokens)) for _ in range(n)]
                        )
                    else:
                        scalars[prop.name].append(float(next(tokens)))
            out[elem.name] = (scalars, lists)
    except StopIteration:
        raise MeshFormatError("PLY data ended early") from None
    except ValueError as exc:
        raise MeshFormatError(f"bad numeric value in PLY data: {exc}") from None
    return out


def _read_binary_elements(fh, elements):
    data = fh.read()
    offset = 0
    out = {}
    for elem in elements:
        scalars = {p.name: [] for p in elem.properties if not p.is_list}
        lists = {p.name: [] for p in elem.properties if p.is_list}
        if all(not p.is_list for p in elem.properties):
            # Fixed-size rows: decode the whole element in one step.
            dtype = np.dtype([(p.name, "<" + p.kind) for p in elem.properties])
            end = offset + dtype.itemsize * elem.count
            if end > len(data):
                raise MeshFormatError("PLY data ended early")
            rows = np.frombuffer(data, dtype=dtype, count=elem.count, offset=offset)
            offset = end
            for p in elem.properties:
                scalars[p.name] = rows[p.name].astype(np.float64)
        else:
            for _ in range(elem.count):
                for p in elem.properties:
                    if p.is_list:
                        cnt_dt = np.dtype("<" + p.count_kind)
                        if offset + cnt_dt.itemsize > len(data):
                            raise MeshFormatError("PLY data ended early")
                        n = int(
                            np.frombuffer(data, cnt_dt, count=1, offset=offset)[0]
                        )
                        offset += cnt_dt.itemsize
                        item_dt = np.dtype("<" + p.kind)
                        end = offset + item_dt.itemsize * n
                        if end > len(data):
                            raise MeshFormatError("PLY data ended early")
                        vals = np.frombuffer(data, item_dt, count=n, offset=offset)
                        offset = end
                        lists[p.name].append(vals.astype(np.float64).tolist())
                    else:
                        dt = np.dtype("<" + p.kind)
                        end = offset + dt.itemsize
                        if end > len(data):
                            raise MeshFormatError("PLY data ended early")
                        scalars[p.name].append(
                            float(np.frombuffer(data, dt, count=1, offset=offset)[0])
                        )
                        offset = end
        out[elem.name] = (scalars, lists)
    return out


def _fan_triangulate(face_rows, n_vertices):
    """Turn polygon index lists into triangles, fanning from the first index."""
    triangles = []
    for i, idx in enumerate(face_rows):
        if len(idx) < 3:
            raise MeshFormatError(
                f"face {i} has {len(idx)} indices; at least 3 are required"
            )
        ints = [int(v) for v in idx]
        if any(v != f for v, f in zip(ints, idx)):
            raise MeshFormatError(f"face {i} has non-integer indices")
        if min(ints) < 0 or max(ints) >= n_vertices:
            raise MeshFormatError(
                f"face {i} references vertex {max(ints)} but the mesh has "
                f"only {n_vertices} vertices"
            )
        for k in range(1, len(ints) - 1):
            triangles.append((ints[0], ints[k], ints[k + 1]))
    return np.asarray(triangles, dtype=np.int64).reshape(-1, 3)


def load_mesh(path):
    """Load a triangle mesh from an ascii or binary little-endian PLY file.

    Vertex order is preserved. Faces with more than three indices are
    fan-triangulated from their first index. Color and texture attributes
    are parsed but ignored. The mesh diameter (largest inter-vertex
    distance) is computed on load.

    :param path: PLY file path.
    :return: TriangleMesh.
    :raises MeshFormatError: malformed header or data, big-endian input,
        faces with fewer than 3 indices, out-of-range vertex indices.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        fmt, elements = _parse_ply_header(fh)
        names = [e.name for e in elements]
        if "vertex" not in names:
            raise MeshFormatError(f"{path}: PLY has no 'vertex' element")
        if "face" not in names:
            raise MeshFormatError(f"{path}: PLY has no 'face' element")
        if fmt == "ascii":
            parsed = _read_ascii_elements(fh, elements)
        else:
            parsed = _read_binary_elements(fh, elements)

    vert_scalars, _ = parsed["vertex"]
    for coord in ("x", "y", "z"):
        if coord not in vert_scalars:
            raise MeshFormatError(f"{path}: vertex element lacks '{coord}'")
    vertices = np.column_stack(
        [np.asarray(vert_scalars[c], dtype=np.float64) for c in ("x", "y", "z")]
    )

    _, face_lists = parsed["face"]
    index_rows = None
    for name in ("vertex_indices", "vertex_index"):
        if name in face_lists:
            index_rows = face_lists[name]
            break
    if index_rows is None:
        if len(face_lists) == 1:
            index_rows = next(iter(face_lists.values()))
        else:
            raise MeshFormatError(f"{path}: face element has no vertex index list")

    triangles = _fan_triangulate(index_rows, len(vertices))
    try:
        return TriangleMesh(vertices, triangles)
    except ValueError as exc:
        raise MeshFormatError(f"{path}: {exc}") from None


def save_mesh_ply(path, mesh, binary=False):
    """Write a mesh as a PLY file (ascii, or binary little-endian)."""
    path = Path(path)
    header = [
        "ply",
        "format binary_little_endian 1.0" if binary else "format ascii 1.0",
        f"element vertex {len(mesh.vertices)}",
        "property float x",
        "property float y",
        "property float z",
        f"element face {len(mesh.triangles)}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            fh.write(mesh.vertices.astype("<f4").tobytes())
            for tri in mesh.triangles:
                fh.write(struct.pack("<B3i", 3, *[int(i) for i in tri]))
        else:
            for v in mesh.vertices:
                fh.write(f"{v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n".encode("ascii"))
            for tri in mesh.triangles:
                fh.write(f"3 {tri[0]} {tri[1]} {tri[2]}\n".encode("ascii"))
