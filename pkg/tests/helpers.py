"""Shared helpers for the test suite."""

from pathlib import Path

import numpy as np

from poseval.geometry import RigidTransform, rotation_about_axis

DATA_DIR = Path(__file__).parent / "data"
MINI_ROOT = DATA_DIR / "mini"


def random_rotation(rng):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return rotation_about_axis(axis, rng.uniform(0.0, 2.0 * np.pi))


def random_pose(rng, center=(0.0, 0.0, 600.0), spread=50.0):
    translation = np.asarray(center, dtype=float) + rng.uniform(
        -spread, spread, size=3
    )
    return RigidTransform(random_rotation(rng), translation)


def random_visibility_instance(rng, height, width):
    """Random distance maps plus masks obeying the footprint invariant."""
    est = np.where(
        rng.random((height, width)) < 0.7,
        rng.uniform(100.0, 1000.0, (height, width)),
        0.0,
    )
    gt = np.where(
        rng.random((height, width)) < 0.7,
        rng.uniform(100.0, 1000.0, (height, width)),
        0.0,
    )
    est_mask = (est > 0) & (rng.random((height, width)) < 0.8)
    gt_mask = (gt > 0) & (rng.random((height, width)) < 0.8)
    if not (est_mask | gt_mask).any():
        gt[0, 0] = 500.0
        gt_mask[0, 0] = True
    return est, gt, est_mask, gt_mask
