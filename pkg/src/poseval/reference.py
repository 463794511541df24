"""Naive reference implementations for verification.

These re-derive the core quantities with straight-line loops, independent of
the vectorized production paths, so the two can be checked against each
other (see the ``selftest`` command and the test suite). Slow on purpose;
do not use them for evaluation runs.
"""

from __future__ import annotations

import math

import numpy as np


def vsd_pixel_loop(est_dist, gt_dist, est_mask, gt_mask, taus):
    """Per-pixel double-loop evaluation of the visible surface discrepancy.

    Returns (errors, union_count, mismatch_counts) so callers can compare
    integer counts bit-for-bit.
    """
    est_dist = np.asarray(est_dist, dtype=np.float64)
    gt_dist = np.asarray(gt_dist, dtype=np.float64)
    est_mask = np.asarray(est_mask, dtype=bool)
    gt_mask = np.asarray(gt_mask, dtype=bool)
    height, width = est_dist.shape
    union_count = 0
    mismatches = [0] * len(taus)
    for v in range(height):
        for u in range(width):
            in_est = bool(est_mask[v, u])
            in_gt = bool(gt_mask[v, u])
            if not (in_est or in_gt):
                continue
            union_count += 1
            if in_est and in_gt:
                diff = abs(est_dist[v, u] - gt_dist[v, u])
                for k, tau in enumerate(taus):
                    if diff >= tau:
                        mismatches[k] += 1
            else:
                for k in range(len(taus)):
                    mismatches[k] += 1
    if union_count == 0:
        raise ValueError("empty visibility union")
    errors = [m / union_count for m in mismatches]
    return np.asarray(errors), union_count, mismatches


def mssd_triple_loop(est, gt, symmetries, vertices):
    """Symmetry x vertex double maximum/minimum, fully scalar."""
    best = math.inf
    for sym in symmetries:
        gt_sym = gt.compose(sym)
        worst = 0.0
        for x in np.asarray(vertices, dtype=np.float64):
            pe = est.rotation @ x + est.translation
            pg = gt_sym.rotation @ x + gt_sym.translation
            d = math.dist(pe, pg)
            if d > worst:
                worst = d
        best = min(best, worst)
    return best


def mspd_triple_loop(est, gt, symmetries, vertices, cam):
    """Projected variant of :func:`mssd_triple_loop` (pixels)."""

    def project(p):
        if p[2] <= 0:
            raise ValueError("vertex behind camera")
        return (
            cam.fx * p[0] / p[2] + cam.cx,
            cam.fy * p[1] / p[2] + cam.cy,
        )

    best = math.inf
    for sym in symmetries:
        gt_sym = gt.compose(sym)
        worst = 0.0
        for x in np.asarray(vertices, dtype=np.float64):
            ue, ve = project(est.rotation @ x + est.translation)
            ug, vg = project(gt_sym.rotation @ x + gt_sym.translation)
            d = math.hypot(ue - ug, ve - vg)
            if d > worst:
                worst = d
        best = min(best, worst)
    return best


def hausdorff_double_loop(points_a, points_b):
    """O(n m) symmetric Hausdorff distance."""
    a = np.asarray(points_a, dtype=np.float64)
    b = np.asarray(points_b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ValueError("empty point set")

    def directed(src, dst):
        worst = 0.0
        for p in src:
            nearest = min(math.dist(p, q) for q in dst)
            if nearest > worst:
                worst = nearest
        return worst

    return max(directed(a, b), directed(b, a))


def add_loop(est, gt, vertices):
    total = 0.0
    pts = np.asarray(vertices, dtype=np.float64)
    for x in pts:
        pe = est.rotation @ x + est.translation
        pg = gt.rotation @ x + gt.translation
        total += math.dist(pe, pg)
    return total / len(pts)


def adi_loop(est, gt, vertices):
    pts = np.asarray(vertices, dtype=np.float64)
    pts_est = [est.rotation @ x + est.translation for x in pts]
    pts_gt = [gt.rotation @ x + gt.translation for x in pts]
    total = 0.0
    for pe in pts_est:
        total += min(math.dist(pe, pg) for pg in pts_gt)
    return total / len(pts)


def raycast_distance_map(mesh, pose, cam, near=10.0):
    """Per-pixel ray vs triangle intersection renderer (Moller-Trumbore).

    Independent oracle for the rasterizer: casts the ray of every pixel
    through the continuous image point (u, v) and keeps the nearest hit
    with Z >= near.
    """
    verts = pose.apply(mesh.vertices)
    tris = [verts[t] for t in mesh.triangles]
    dist = np.zeros((cam.height, cam.width))
    for v in range(cam.height):
        for u in range(cam.width):
            direction = np.array(
                [(u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0]
            )
            best_z = math.inf
            for tri in tris:
                t_hit = _ray_triangle(direction, tri)
                if t_hit is not None and near <= t_hit < best_z:
                    best_z = t_hit
            if math.isfinite(best_z):
                dist[v, u] = best_z * np.linalg.norm(direction)
    return dist


def _ray_triangle(direction, tri, eps=1e-12):
    """Moller-Trumbore for a ray from the origin; returns Z of the hit.

    The ray parameter t equals the camera-space Z of the intersection since
    direction[2] == 1. Boundary hits (barycentric coordinates of 0 or 1)
    count as hits.
    """
    e1 = tri[1] - tri[0]
    e2 = tri[2] - tri[0]
    pvec = np.cross(direction, e2)
    det = e1 @ pvec
    if abs(det) < eps:
        return None
    inv_det = 1.0 / det
    tvec = -tri[0]
    bary_u = (tvec @ pvec) * inv_det
    if bary_u < 0.0 or bary_u > 1.0:
        return None
    qvec = np.cross(tvec, e1)
    bary_v = (direction @ qvec) * inv_det
    if bary_v < 0.0 or bary_u + bary_v > 1.0:
        return None
    t_hit = (e2 @ qvec) * inv_det
    if t_hit <= 0.0:
        return None
    return t_hit
