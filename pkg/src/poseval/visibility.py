"""Visibility masks: where a rendered object is visible against the scene.

A rendered object is considered visible at a pixel of its footprint when it
lies in front of (or within a tolerance behind) the measured scene surface,
and everywhere the sensor has no measurement. Pixels where the object would
float in front of the measured surface count as visible too: the object
would occlude the scene there.
"""

from __future__ import annotations

import numpy as np

DEFAULT_DELTA = 15.0  # mm, occlusion tolerance of the visibility test


def _check_shapes(*maps):
    shapes = {m.shape for m in maps}
    if len(shapes) != 1:
        raise ValueError(f"map dimensions differ: {sorted(shapes)}")


def visibility_mask(rendered, measured, delta=DEFAULT_DELTA):
    """Estimate the visibility mask of a rendered object.

    A pixel is visible iff rendered > 0 and (measured == 0 or
    rendered <= measured + delta).

    :param rendered: distance map of the object render [mm].
    :param measured: distance map of the test image [mm]; 0 = no measurement.
    :param delta: occlusion tolerance [mm], > 0.
    :return: boolean mask, a subset of the render footprint.
    """
    rendered = np.asarray(rendered, dtype=np.float64)
    measured = np.asarray(measured, dtype=np.float64)
    _check_shapes(rendered, measured)
    if delta <= 0:
        raise ValueError("delta must be positive")
    return (rendered > 0) & ((measured == 0) | (rendered <= measured + delta))


def gt_visibility_mask(rendered_gt, measured, delta=DEFAULT_DELTA):
    """Visibility mask of the object rendered in the ground-truth pose.

    Same rule as :func:`visibility_mask`; kept as a named entry point for
    its distinct role in the error pipeline.
    """
    return visibility_mask(rendered_gt, measured, delta)


def est_visibility_mask_extended(rendered_est, measured, gt_mask, delta=DEFAULT_DELTA):
    """Visibility mask of an estimated pose, extended by the GT mask.

    On top of the plain visibility rule, pixels are counted visible wherever
    the ground-truth mask is set and the estimate's render has a footprint:
    an estimate is not penalized as invisible where the ground-truth object
    itself occupies the image.
    """
    gt_mask = np.asarray(gt_mask, dtype=bool)
    rendered_est = np.asarray(rendered_est, dtype=np.float64)
    _check_shapes(rendered_est, np.asarray(measured), gt_mask)
    base = visibility_mask(rendered_est, measured, delta)
    return base | (gt_mask & (rendered_est > 0))


def visible_fraction(mask, rendered):
    """Fraction of the render footprint that is visible, in [0, 1].

    Returns 0.0 when the footprint is empty (object fully outside the
    image).

    :raises ValueError: if the mask is not a subset of the footprint.
    """
    mask = np.asarray(mask, dtype=bool)
    rendered = np.asarray(rendered, dtype=np.float64)
    _check_shapes(mask, rendered)
    footprint = rendered > 0
    if np.any(mask & ~footprint):
        raise ValueError("visibility mask extends outside the render footprint")
    total = int(footprint.sum())
    if total == 0:
        return 0.0
    return float(mask.sum()) / total
