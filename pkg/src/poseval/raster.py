"""Software pinhole rasterizer producing distance and depth maps.

Maps are row-major float arrays of shape (height, width). A value of 0 means
"no measurement / background". A depth map stores the camera-space Z
coordinate of the surface point seen at a pixel; a distance map stores the
Euclidean distance from the camera center to that point.

Pixel convention: pixel (u, v) samples the viewing ray through the continuous
image point (u, v), i.e. pixel centers sit on integer coordinates. The same
convention is used by :func:`depth_to_distance`, so rendered distance maps
and converted rendered depth maps agree to floating-point precision. For
coverage, boundary samples are resolved with a top-left fill rule, which
makes pixel counts deterministic and free of double-counting along shared
edges.
"""

from __future__ import annotations

import numpy as np

from .errors import VertexBehindCamera

DEFAULT_NEAR = 10.0  # mm


def pixel_ray_norms(cam):
    """Per-pixel norm of the viewing-ray direction ((u-cx)/fx, (v-cy)/fy, 1).

    Multiplying a Z value by this grid turns it into a camera-center
    distance.
    """
    us = (np.arange(cam.width, dtype=np.float64) - cam.cx) / cam.fx
    vs = (np.arange(cam.height, dtype=np.float64) - cam.cy) / cam.fy
    return np.sqrt(us[None, :] ** 2 + vs[:, None] ** 2 + 1.0)


def depth_to_distance(depth, cam):
    """Convert a depth map (Z values) into a distance map.

    value(u, v) = depth(u, v) * ||((u-cx)/fx, (v-cy)/fy, 1)||; zeros stay
    zero.

    :param depth: (height, width) array of Z values [mm], 0 = no measurement.
    :param cam: CameraIntrinsics matching the map size.
    :raises ValueError: if the map size does not match the intrinsics.
    """
    depth = np.asarray(depth, dtype=np.float64)
    if depth.shape != (cam.height, cam.width):
        raise ValueError(
            f"depth map is {depth.shape}, camera expects "
            f"{(cam.height, cam.width)}"
        )
    return depth * pixel_ray_norms(cam)


def project_points(points, cam):
    """Project camera-space points to sub-pixel image coordinates.

    :param points: (n, 3) array; all Z must be > 0.
    :return: (n, 2) array of (u, v) pixel coordinates.
    :raises VertexBehindCamera: reporting the first offending point index.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError("expected an (n, 3) array")
    z = pts[:, 2]
    bad = np.nonzero(z <= 0)[0]
    if bad.size:
        raise VertexBehindCamera(bad[0], z[bad[0]])
    u = cam.fx * pts[:, 0] / z + cam.cx
    v = cam.fy * pts[:, 1] / z + cam.cy
    return np.column_stack([u, v])


def _clip_near(triangle, near):
    """Sutherland-Hodgman clip of a camera-space triangle at Z = near.

    Returns a list of triangles (possibly empty, one, or two).
    """
    inside = triangle[:, 2] >= near
    if inside.all():
        return [triangle]
    if not inside.any():
        return []
    poly = []
    for i in range(3):
        a, b = triangle[i], triangle[(i + 1) % 3]
        a_in, b_in = inside[i], inside[(i + 1) % 3]
        if a_in:
            poly.append(a)
        if a_in != b_in:
            t = (near - a[2]) / (b[2] - a[2])
            poly.append(a + t * (b - a))
    out = []
    for k in range(1, len(poly) - 1):
        out.append(np.array([poly[0], poly[k], poly[k + 1]]))
    return out


def _edge_accepts_boundary(p_from, p_to):
    # Top-left rule for positively oriented triangles: a horizontal edge
    # running in +u is a top edge, an edge running in -v is a left edge.
    du = p_to[0] - p_from[0]
    dv = p_to[1] - p_from[1]
    return dv < 0 or (dv == 0 and du > 0)


def render_depth_map(mesh, pose, cam, near=DEFAULT_NEAR):
    """Z-buffer rasterization of ``mesh`` in ``pose``; returns a depth map.

    Triangles fully behind the near plane are discarded; partially-behind
    triangles are clipped at Z = near. The nearest surface wins per pixel;
    uncovered pixels are 0. Per-pixel Z is obtained by perspective-correct
    barycentric interpolation. Output is deterministic: identical inputs
    produce bit-identical maps.
    """
    if near <= 0:
        raise ValueError("near plane must be positive")
    verts = pose.apply(mesh.vertices)
    zbuf = np.full((cam.height, cam.width), np.inf)

    for tri_idx in mesh.triangles:
        for tri in _clip_near(verts[tri_idx], near):
            _rasterize_triangle(tri, cam, zbuf)

    depth = np.where(np.isfinite(zbuf), zbuf, 0.0)
    return depth


def _rasterize_triangle(tri, cam, zbuf):
    z = tri[:, 2]
    pu = cam.fx * tri[:, 0] / z + cam.cx
    pv = cam.fy * tri[:, 1] / z + cam.cy
    pts = np.column_stack([pu, pv])

    area2 = (pts[1, 0] - pts[0, 0]) * (pts[2, 1] - pts[0, 1]) - (
        pts[1, 1] - pts[0, 1]
    ) * (pts[2, 0] - pts[0, 0])
    if area2 == 0:
        return
    if area2 < 0:
        pts = pts[[0, 2, 1]]
        z = z[[0, 2, 1]]
        area2 = -area2

    u0 = max(0, int(np.ceil(pts[:, 0].min())))
    u1 = min(cam.width - 1, int(np.floor(pts[:, 0].max())))
    v0 = max(0, int(np.ceil(pts[:, 1].min())))
    v1 = min(cam.height - 1, int(np.floor(pts[:, 1].max())))
    if u0 > u1 or v0 > v1:
        return

    us = np.arange(u0, u1 + 1, dtype=np.float64)
    vs = np.arange(v0, v1 + 1, dtype=np.float64)
    gu, gv = np.meshgrid(us, vs)

    # Edge functions; w_i belongs to the edge opposite vertex i.
    covered = None
    weights = []
    for i in range(3):
        a, b = pts[(i + 1) % 3], pts[(i + 2) % 3]
        w = (b[0] - a[0]) * (gv - a[1]) - (b[1] - a[1]) * (gu - a[0])
        ok = (w > 0) | ((w == 0) & _edge_accepts_boundary(a, b))
        covered = ok if covered is None else (covered & ok)
        weights.append(w)
    if not covered.any():
        return

    # Perspective-correct Z: 1/Z is linear in screen space.
    inv_z = (
        weights[0] / z[0] + weights[1] / z[1] + weights[2] / z[2]
    ) / area2
    with np.errstate(divide="ignore"):
        z_interp = 1.0 / inv_z

    sub = zbuf[v0 : v1 + 1, u0 : u1 + 1]
    update = covered & (z_interp < sub)
    sub[update] = z_interp[update]


def render_distance_map(mesh, pose, cam, near=DEFAULT_NEAR):
    """Rasterize ``mesh`` in ``pose`` and return the distance map.

    Equivalent to rendering the depth map and converting it with
    :func:`depth_to_distance` (uncovered pixels stay 0).
    """
    return depth_to_distance(render_depth_map(mesh, pose, cam, near), cam)
