#!/usr/bin/env python3
"""Finding the global rotational symmetries of an object model.

Symmetric objects admit many poses that look identical; the surface and
projection errors take a minimum over the symmetry transforms so that any
of the equivalent poses scores the same. A transform counts as a symmetry
when it moves every vertex by less than epsilon = max(15 mm, 0.1 d) in
Hausdorff distance.
"""

import numpy as np

from poseval.shapes import cube, cylinder, scalene_tetrahedron, square_plate
from poseval.symmetry import (
    build_symmetry_set,
    discretize_continuous,
    find_continuous_symmetries,
    find_discrete_symmetries,
    symmetry_epsilon,
)

for name, mesh in (
    ("cube", cube(200.0)),
    ("square plate", square_plate()),
    ("scalene tetrahedron", scalene_tetrahedron()),
):
    syms = find_discrete_symmetries(mesh)
    print(f"{name:<22} eps={symmetry_epsilon(mesh):6.2f} mm  "
          f"discrete symmetries: {len(syms)}")

# A cylinder has a continuous rotational symmetry about its axis. The axis
# is detected by sweeping test angles; it is then discretized finely enough
# that the vertex farthest from the axis travels at most 1% of the diameter
# between consecutive steps.
cyl = cylinder(radius=50.0, height=100.0, segments=64)
axes = find_continuous_symmetries(cyl)
axis = axes[0]
steps = discretize_continuous(axis, cyl)
print(f"\ncylinder: {len(axes)} continuous axis {np.round(axis.axis, 6)}")
print(f"discretized into {len(steps) + 1} rotations (identity included)")

# build_symmetry_set is the one-stop entry the scoring pipeline uses: it
# prefers annotated symmetries when a models_info entry is supplied and
# falls back to the search otherwise, discretizing continuous axes.
full = build_symmetry_set(cyl)
tags = {tag: sum(1 for t in full.provenance if t == tag) for tag in set(full.provenance)}
print(f"combined symmetry set: {len(full)} transforms, by provenance: {tags}")

# Texture can disambiguate a geometric symmetry (a textured face makes a
# rotation distinguishable); that judgement is manual. See
# poseval.symmetry.filter_by_texture and the `poseval symmetries` command,
# which writes an annotation file for review.
