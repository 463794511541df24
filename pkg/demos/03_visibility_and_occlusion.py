#!/usr/bin/env python3
"""Visibility masks: deciding where an object is actually seen.

An object rendered into a scene is visible where its surface lies in front
of (or within a small tolerance behind) the measured scene surface, and
everywhere the sensor reports no measurement at all. The visible fraction
of an instance decides whether it is scored: instances under 10% visibility
are dropped from the evaluation.
"""

import numpy as np

from poseval import CameraIntrinsics, RigidTransform
from poseval.raster import depth_to_distance, render_depth_map, render_distance_map
from poseval.shapes import cube, square_plate
from poseval.visibility import visibility_mask, visible_fraction

cam = CameraIntrinsics(fx=240.0, fy=240.0, cx=64.0, cy=64.0, width=128, height=128)

# The object of interest sits behind an occluding plate that covers part of
# the view.
target_pose = RigidTransform(np.eye(3), (0.0, 0.0, 500.0))
occluder_pose = RigidTransform(np.eye(3), (-45.0, 0.0, 420.0))

target = cube(80.0)
occluder = square_plate(90.0, 10.0)

# The "measured" scene: a composite depth image of both objects, as a depth
# sensor would capture it.
scene_depth = render_depth_map(target, target_pose, cam)
occ_depth = render_depth_map(occluder, occluder_pose, cam)
front = (occ_depth > 0) & ((scene_depth == 0) | (occ_depth < scene_depth))
scene_depth[front] = occ_depth[front]
measured = depth_to_distance(scene_depth, cam)

# Rendered distance map of the target alone, compared against the scene:
rendered = render_distance_map(target, target_pose, cam)
mask = visibility_mask(rendered, measured, delta=15.0)
fraction = visible_fraction(mask, rendered)
print(f"target footprint: {(rendered > 0).sum()} px")
print(f"visible: {mask.sum()} px -> fraction {fraction:.2f}")
print("scored at the default 10% threshold:", fraction >= 0.1)

# Where the sensor has no measurement the object counts as visible (matte or
# glossy surfaces often drop out of depth images):
holes = measured.copy()
footprint = rendered > 0
holes[footprint] = 0.0  # knock out every measurement on the object
mask_no_depth = visibility_mask(rendered, holes, delta=15.0)
print("with missing depth the whole footprint is visible:",
      mask_no_depth.sum() == footprint.sum())
