"""Procedural meshes used by fixtures, demos, and the self-test."""

from __future__ import annotations

import numpy as np

from .geometry import TriangleMesh

# Vertices chosen so that all six edge lengths are pairwise distinct by a
# wide margin: the only vertex-set symmetry is the identity.
_SCALENE_TETRA = np.array(
    [
        (0.0, 0.0, 0.0),
        (240.0, 0.0, 0.0),
        (60.0, 200.0, 0.0),
        (90.0, 70.0, 160.0),
    ]
)


def box(size_x, size_y, size_z, center=(0.0, 0.0, 0.0)):
    """Axis-aligned box mesh: 8 vertices, 12 triangles."""
    hx, hy, hz = size_x / 2.0, size_y / 2.0, size_z / 2.0
    cx, cy, cz = center
    vertices = np.array(
        [
            (cx + sx * hx, cy + sy * hy, cz + sz * hz)
            for sx in (-1, 1)
            for sy in (-1, 1)
            for sz in (-1, 1)
        ]
    )
    # Faces of the (sx, sy, sz) corner ordering above; outward windings.
    quads = [
        (0, 1, 3, 2),  # -x
        (4, 6, 7, 5),  # +x
        (0, 4, 5, 1),  # -y
        (2, 3, 7, 6),  # +y
        (0, 2, 6, 4),  # -z
        (1, 5, 7, 3),  # +z
    ]
    triangles = []
    for a, b, c, d in quads:
        triangles.append((a, b, c))
        triangles.append((a, c, d))
    return TriangleMesh(vertices, triangles)


def cube(side, center=(0.0, 0.0, 0.0)):
    return box(side, side, side, center)


def square_plate(side=200.0, thickness=80.0):
    """A box with a square cross section: 8 rotational symmetries.

    The default proportions keep every near-coincidence (a corner landing
    between two true corner positions) beyond the symmetry tolerance
    epsilon = 0.1 * diameter, so the vertex-set symmetries are exactly the
    8 rotations of the square prism.
    """
    return box(side, side, thickness)


def scalene_tetrahedron(scale=1.0):
    """Fully asymmetric tetrahedron: identity is its only symmetry."""
    vertices = _SCALENE_TETRA * scale
    triangles = [(0, 2, 1), (0, 1, 3), (1, 2, 3), (0, 3, 2)]
    return TriangleMesh(vertices, triangles)


def cylinder(radius=50.0, height=100.0, segments=64):
    """Closed prism over a regular polygon, approximating a cylinder.

    With 64 segments the polygonal deviation under an arbitrary rotation
    about the main axis stays far below the symmetry tolerance, so the mesh
    carries a continuous rotational symmetry about +z through the origin.
    """
    if segments < 3:
        raise ValueError("need at least 3 segments")
    angles = 2.0 * np.pi * np.arange(segments) / segments
    ring = np.column_stack([radius * np.cos(angles), radius * np.sin(angles)])
    top = np.column_stack([ring, np.full(segments, height / 2.0)])
    bottom = np.column_stack([ring, np.full(segments, -height / 2.0)])
    vertices = np.vstack([top, bottom,
                          [(0.0, 0.0, height / 2.0)],
                          [(0.0, 0.0, -height / 2.0)]])
    top_center = 2 * segments
    bottom_center = 2 * segments + 1

    triangles = []
    for i in range(segments):
        j = (i + 1) % segments
        ti, tj = i, j
        bi, bj = segments + i, segments + j
        triangles.append((ti, bi, tj))
        triangles.append((tj, bi, bj))
        triangles.append((top_center, ti, tj))
        triangles.append((bottom_center, bj, bi))
    return TriangleMesh(vertices, triangles)


def disk(radius=100.0, segments=64):
    """Flat polygon fan; diameter 2 * radius, every vertex at distance
    <= radius from the +z axis through the origin."""
    angles = 2.0 * np.pi * np.arange(segments) / segments
    rim = np.column_stack(
        [radius * np.cos(angles), radius * np.sin(angles), np.zeros(segments)]
    )
    vertices = np.vstack([rim, [(0.0, 0.0, 0.0)]])
    center = segments
    triangles = [
        (center, i, (i + 1) % segments) for i in range(segments)
    ]
    return TriangleMesh(vertices, triangles)
