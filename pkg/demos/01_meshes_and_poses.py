#!/usr/bin/env python3
"""Meshes and rigid transforms: the geometric foundation.

Loads a PLY model from the bundled mini dataset, inspects its diameter, and
walks through composing and applying rigid transforms.
"""

from pathlib import Path

import numpy as np

from poseval import RigidTransform, load_mesh, transform_points
from poseval.geometry import rotation_about_axis
from poseval.shapes import scalene_tetrahedron

MINI = Path(__file__).resolve().parents[1] / "tests" / "data" / "mini"

# --- load a model ----------------------------------------------------------
# Models are plain PLY files (ascii or binary little-endian). The diameter,
# the largest distance between any two vertices, is computed on load; all
# correctness thresholds later scale with it.
mesh = load_mesh(MINI / "models" / "obj_000001.ply")
print(f"cube model: {len(mesh.vertices)} vertices, {len(mesh.triangles)} triangles")
print(f"diameter: {mesh.diameter:.3f} mm (= side * sqrt(3) for a cube)")

# Procedural shapes are available for experiments without any files:
tetra = scalene_tetrahedron()
print(f"scalene tetrahedron diameter: {tetra.diameter:.3f} mm")

# --- rigid transforms ------------------------------------------------------
# A pose maps model coordinates into camera coordinates: x -> R x + t, with
# translations in millimeters.
turn = RigidTransform(rotation_about_axis((0, 0, 1), np.pi / 2), (0.0, 0.0, 0.0))
push = RigidTransform(np.eye(3), (0.0, 0.0, 600.0))

# Composition applies the right transform first: (push o turn)(x).
pose = push.compose(turn)
corner = mesh.vertices[:1]
print("corner before:", corner[0])
print("after turn+push:", transform_points(pose, corner)[0])

# Inverses and round trips:
back = pose.inverse().apply(pose.apply(mesh.vertices))
print("max round-trip error:", np.abs(back - mesh.vertices).max(), "mm")

# Rigid motions preserve the diameter (they are isometries):
moved = mesh.transformed(pose)
print("diameter after motion:", f"{moved.diameter:.3f} mm (unchanged)")
