#!/usr/bin/env python3
"""Rendering distance maps with the software rasterizer.

A distance map stores, per pixel, the distance from the camera center to the
surface point seen there (not the Z coordinate - that is a depth map). The
comparison of rendered against measured distance maps is what drives the
visible-surface error later.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from poseval import CameraIntrinsics, RigidTransform
from poseval.geometry import rotation_about_axis
from poseval.raster import depth_to_distance, render_depth_map, render_distance_map
from poseval.shapes import cube

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

# A small pinhole camera. Pixel (u, v) looks along ((u-cx)/fx, (v-cy)/fy, 1).
cam = CameraIntrinsics(fx=240.0, fy=240.0, cx=64.0, cy=64.0, width=128, height=128)

mesh = cube(80.0)
pose = RigidTransform(
    rotation_about_axis((1, 1, 0), np.deg2rad(35.0)), (0.0, 0.0, 420.0)
)

distance = render_distance_map(mesh, pose, cam)
depth = render_depth_map(mesh, pose, cam)

covered = distance > 0
print(f"covered pixels: {covered.sum()} of {cam.width * cam.height}")
print(f"distance range: {distance[covered].min():.1f}..{distance[covered].max():.1f} mm")

# Depth maps convert to distance maps by scaling each pixel with the norm of
# its viewing ray; the renderer is exactly consistent with that conversion.
converted = depth_to_distance(depth, cam)
print("max |render - converted|:", np.abs(converted - distance).max(), "mm")

fig, axes = plt.subplots(1, 2, figsize=(9, 4))
for ax, img, title in ((axes[0], depth, "depth (Z) [mm]"),
                       (axes[1], distance, "distance [mm]")):
    shown = np.where(img > 0, img, np.nan)
    im = ax.imshow(shown, cmap="viridis")
    ax.set_title(title)
    fig.colorbar(im, ax=ax, shrink=0.8)
fig.tight_layout()
fig.savefig(OUT / "distance_vs_depth.png", dpi=110)
print(f"figure written to {OUT / 'distance_vs_depth.png'}")
