"""Global rotational symmetries of a mesh.

A transform S counts as a symmetry when the symmetric Hausdorff distance
between the vertex set and its transformed copy stays below
epsilon = max(15 mm, 0.1 * diameter). The search enumerates rotations about
the vertex centroid (axes from the covariance eigenvectors and from
icosahedrally-binned vertex direction clusters, angles 360/k for k = 2..36),
verifies each candidate, snaps accepted candidates onto the nearest local
optimum with a few ICP iterations, and closes the set under composition.
Continuous rotational symmetries are detected by sweeping test angles about
candidate axes and are discretized so that the vertex farthest from the axis
travels at most 1% of the diameter between consecutive rotations.

Texture can break a geometric symmetry; that judgement is manual, so the
final set may be cut down via :func:`filter_by_texture` with a hand-written
keep list.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .geometry import (
    RigidTransform,
    rotation_about_point,
    rotation_angle_between,
)

logger = logging.getLogger(__name__)

EPSILON_FLOOR = 15.0          # mm; keeps small details from breaking symmetries
ANGLE_MERGE_TOL = np.deg2rad(1.0)
CANDIDATE_ANGLE_MAX_ORDER = 36
CONTINUOUS_SWEEP_DEG = range(10, 360, 10)
MAX_SET_SIZE = 512
TRAVEL_FRACTION = 0.01        # max travel of the farthest vertex, per step


def hausdorff(points_a, points_b):
    """Symmetric Hausdorff distance between two point sets [mm].

    max over both directions of (max over one set of the distance to the
    nearest point of the other set). Exact; nearest neighbors come from a
    k-d tree.

    :raises ValueError: if either set is empty.
    """
    a = np.atleast_2d(np.asarray(points_a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(points_b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise ValueError("Hausdorff distance of an empty point set")
    d_ab = cKDTree(b).query(a)[0].max()
    d_ba = cKDTree(a).query(b)[0].max()
    return float(max(d_ab, d_ba))


def symmetry_epsilon(mesh):
    """Allowed vertex deviation for a symmetry: max(15 mm, 0.1 * diameter)."""
    return max(EPSILON_FLOOR, 0.1 * mesh.diameter)


@dataclass(frozen=True)
class ContinuousSymmetry:
    """A rotational symmetry axis: unit direction plus a point on the axis."""

    axis: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        axis = np.array(self.axis, dtype=np.float64).reshape(3)
        offset = np.array(self.offset, dtype=np.float64).reshape(3)
        norm = np.linalg.norm(axis)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError("axis must have unit norm (within 1e-9)")
        axis.setflags(write=False)
        offset.setflags(write=False)
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "offset", offset)


class SymmetrySet:
    """A finite list of pose-equivalent rigid transforms, always
    containing the identity.

    ``provenance`` carries one tag per transform:
    "annotated" | "searched" | "discretized-continuous".
    """

    def __init__(self, transforms, provenance):
        transforms = list(transforms)
        provenance = list(provenance)
        if len(transforms) != len(provenance):
            raise ValueError("one provenance tag per transform required")
        if not any(_is_identity(t) for t in transforms):
            raise ValueError("a symmetry set must contain the identity")
        self.transforms = tuple(transforms)
        self.provenance = tuple(provenance)

    def __len__(self):
        return len(self.transforms)

    def __iter__(self):
        return iter(self.transforms)

    def __getitem__(self, i):
        return self.transforms[i]

    @classmethod
    def identity_only(cls, tag="searched"):
        return cls([RigidTransform.identity()], [tag])


def _is_identity(transform, angle_tol=ANGLE_MERGE_TOL, translation_tol=1e-6):
    return (
        rotation_angle_between(transform.rotation, np.eye(3)) < angle_tol
        and np.linalg.norm(transform.translation) < max(translation_tol, 1e-9)
    )


def _is_duplicate(a, b, translation_tol):
    return (
        rotation_angle_between(a.rotation, b.rotation) < ANGLE_MERGE_TOL
        and np.linalg.norm(a.translation - b.translation) < translation_tol
    )


# ---------------------------------------------------------------------------
# Candidate generation
# ---------------------------------------------------------------------------

_ICO_PHI = (1.0 + np.sqrt(5.0)) / 2.0
_ICO_VERTS = np.array(
    [
        (-1, _ICO_PHI, 0), (1, _ICO_PHI, 0), (-1, -_ICO_PHI, 0), (1, -_ICO_PHI, 0),
        (0, -1, _ICO_PHI), (0, 1, _ICO_PHI), (0, -1, -_ICO_PHI), (0, 1, -_ICO_PHI),
        (_ICO_PHI, 0, -1), (_ICO_PHI, 0, 1), (-_ICO_PHI, 0, -1), (-_ICO_PHI, 0, 1),
    ],
    dtype=np.float64,
)
_ICO_FACES = [
    (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
    (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
    (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
    (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
]


def icosphere_directions(frequency=5):
    """Near-uniform unit directions from a subdivided icosahedron.

    A frequency-f subdivision yields 10 f^2 + 2 unique directions
    (252 at the default frequency 5).
    """
    pts = []
    for ia, ib, ic in _ICO_FACES:
        a, b, c = _ICO_VERTS[ia], _ICO_VERTS[ib], _ICO_VERTS[ic]
        for i in range(frequency + 1):
            for j in range(frequency + 1 - i):
                k = frequency - i - j
                p = (i * a + j * b + k * c) / frequency
                pts.append(p / np.linalg.norm(p))
    pts = np.asarray(pts)
    _, unique_idx = np.unique(np.round(pts, 9), axis=0, return_index=True)
    return pts[np.sort(unique_idx)]


def candidate_axes(mesh):
    """Candidate symmetry-axis directions (unit vectors, sign-deduplicated).

    Covariance eigenvectors come first, then the mean directions of vertex
    clusters obtained by binning centroid-to-vertex directions onto a
    252-point icosahedral sphere sampling.
    """
    centered = mesh.vertices - mesh.centroid
    axes = []

    cov = centered.T @ centered / len(centered)
    _, eigvecs = np.linalg.eigh(cov)
    for i in range(3):
        axes.append(eigvecs[:, i])

    norms = np.linalg.norm(centered, axis=1)
    keep = norms > 1e-9 * max(1.0, mesh.diameter)
    dirs = centered[keep] / norms[keep, None]
    if len(dirs):
        samples = icosphere_directions()
        bins = np.argmax(dirs @ samples.T, axis=1)
        for b in np.unique(bins):
            mean_dir = dirs[bins == b].mean(axis=0)
            n = np.linalg.norm(mean_dir)
            if n > 1e-12:
                axes.append(mean_dir / n)

    unique = []
    cos_tol = np.cos(np.deg2rad(0.5))
    for axis in axes:
        if not any(abs(axis @ u) > cos_tol for u in unique):
            unique.append(axis)
    return unique


# ---------------------------------------------------------------------------
# Verification and refinement
# ---------------------------------------------------------------------------


def _symmetry_distance(tree, verts, transform):
    moved = transform.apply(verts)
    d_forward = tree.query(moved)[0].max()
    d_backward = cKDTree(moved).query(verts)[0].max()
    return max(float(d_forward), float(d_backward))


def _refine_candidate(tree, verts, transform, iterations=10):
    """Snap an accepted candidate onto the nearest local optimum.

    Each step aligns the transformed vertices to their nearest original
    vertices with a rigid Kabsch fit. Near-misses of a true symmetry
    converge onto it; candidates that merely sit within epsilon of the
    identity collapse onto the identity and are then merged away.
    """
    current = transform
    for _ in range(iterations):
        moved = current.apply(verts)
        _, idx = tree.query(moved)
        targets = verts[idx]
        mc = moved.mean(axis=0)
        tc = targets.mean(axis=0)
        h = (moved - mc).T @ (targets - tc)
        u, _, vt = np.linalg.svd(h)
        d = np.sign(np.linalg.det(vt.T @ u.T))
        fix = np.diag([1.0, 1.0, d if d != 0 else 1.0])
        rot = vt.T @ fix @ u.T
        trans = tc - rot @ mc
        step_angle = rotation_angle_between(rot, np.eye(3))
        if step_angle < 1e-12 and np.linalg.norm(trans) < 1e-12:
            break
        try:
            current = RigidTransform(rot, trans).compose(current)
        except ValueError:  # degenerate fit; keep the unrefined candidate
            break
    return current


def find_discrete_symmetries(mesh, epsilon=None, max_members=MAX_SET_SIZE):
    """Search for discrete rotational symmetries of a mesh.

    Candidate rotations about the vertex centroid are Hausdorff-verified
    against ``epsilon`` (default max(15 mm, 0.1 d)), refined, merged
    (rotations closer than 1 degree and epsilon/10 translation count as
    duplicates) and closed under composition. The identity is always
    included.

    Objects with continuous symmetries legitimately admit very many
    discrete rotations within epsilon; the closure is capped at
    ``max_members`` with a warning. Use annotations for such objects.
    """
    eps = symmetry_epsilon(mesh) if epsilon is None else float(epsilon)
    verts = mesh.vertices
    tree = cKDTree(verts)
    centroid = mesh.centroid
    translation_tol = eps / 10.0

    accepted = [RigidTransform.identity()]

    def try_insert(candidate):
        if any(_is_duplicate(candidate, s, translation_tol) for s in accepted):
            return False
        if _symmetry_distance(tree, verts, candidate) >= eps:
            return False
        refined = _refine_candidate(tree, verts, candidate)
        if _symmetry_distance(tree, verts, refined) >= eps:
            refined = candidate
        if any(_is_duplicate(refined, s, translation_tol) for s in accepted):
            return False
        accepted.append(refined)
        return True

    for axis in candidate_axes(mesh):
        for order in range(2, CANDIDATE_ANGLE_MAX_ORDER + 1):
            if len(accepted) >= max_members:
                break
            angle = 2.0 * np.pi / order
            try_insert(rotation_about_point(axis, angle, centroid))

    # Close under composition ("verified-pair completions").
    capped = False
    changed = True
    while changed and not capped:
        changed = False
        snapshot = list(accepted)
        for a in snapshot:
            for b in snapshot:
                if len(accepted) >= max_members:
                    capped = True
                    break
                if try_insert(a.compose(b)):
                    changed = True
            if capped:
                break
    if capped:
        logger.warning(
            "symmetry search capped at %d members; the object likely has a "
            "continuous symmetry -- use an annotation file", max_members
        )

    order_keys = [
        (
            rotation_angle_between(t.rotation, np.eye(3)),
            tuple(np.round(t.rotation.ravel(), 9)),
        )
        for t in accepted
    ]
    ordered = [t for _, t in sorted(zip(order_keys, accepted), key=lambda p: p[0])]
    return SymmetrySet(ordered, ["searched"] * len(ordered))


def find_continuous_symmetries(mesh, epsilon=None):
    """Detect continuous rotational symmetry axes through the centroid.

    An axis is reported when rotations by every test angle 10, 20, ...,
    350 degrees all pass the Hausdorff-epsilon test. Near-parallel axes are
    merged. If more than one axis survives the object is spherically
    symmetric within epsilon; a warning flags it for manual review.
    """
    eps = symmetry_epsilon(mesh) if epsilon is None else float(epsilon)
    verts = mesh.vertices
    tree = cKDTree(verts)
    centroid = mesh.centroid

    found = []
    for axis in candidate_axes(mesh):
        ok = all(
            _symmetry_distance(
                tree, verts,
                rotation_about_point(axis, np.deg2rad(deg), centroid),
            ) < eps
            for deg in CONTINUOUS_SWEEP_DEG
        )
        if not ok:
            continue
        cos_tol = np.cos(ANGLE_MERGE_TOL)
        if any(abs(axis @ f.axis) > cos_tol for f in found):
            continue
        found.append(ContinuousSymmetry(axis, centroid))

    if len(found) > 1:
        logger.warning(
            "%d distinct continuous symmetry axes found; object appears "
            "spherically symmetric within epsilon -- flagged for manual "
            "review", len(found)
        )
    return found


def discretization_step_count(diameter, r_max):
    """Number of equally spaced steps for a continuous symmetry.

    The step angle theta = 2 asin(min(1, 0.01 d / (2 r_max))) bounds the
    chord travelled by the vertex farthest from the axis to 1% of the
    diameter; the count is ceil(2 pi / theta).
    """
    if r_max <= 0:
        return 1
    half_sine = min(1.0, TRAVEL_FRACTION * diameter / (2.0 * r_max))
    theta = 2.0 * np.arcsin(half_sine)
    return int(np.ceil(2.0 * np.pi / theta))


def discretize_continuous(sym, mesh):
    """Discretize a continuous symmetry into explicit rotations.

    Returns the n - 1 non-identity rotations of the n-step discretization
    (the identity is supplied by the symmetry-set union). If every vertex
    sits on the axis (r_max = 0) the rotation is unobservable: a single
    identity is returned, with a warning.
    """
    rel = mesh.vertices - sym.offset
    along = rel @ sym.axis
    perp = rel - np.outer(along, sym.axis)
    r_max = float(np.linalg.norm(perp, axis=1).max())
    if r_max <= 1e-9 * max(1.0, mesh.diameter):
        logger.warning(
            "all vertices lie on the symmetry axis; emitting identity only"
        )
        return [RigidTransform.identity()]
    n = discretization_step_count(mesh.diameter, r_max)
    return [
        rotation_about_point(sym.axis, 2.0 * np.pi * k / n, sym.offset)
        for k in range(1, n)
    ]


def filter_by_texture(symmetries, keep_indices=None):
    """Apply a manual texture-based keep list to a symmetry set.

    ``keep_indices`` lists the transform indices to retain (the judgement
    whether texture disambiguates a geometric symmetry is made by a human).
    With no annotation the full set passes, with a warning. The identity is
    always retained.

    :raises ValueError: if an index does not exist in the set.
    """
    if keep_indices is None:
        logger.warning(
            "no texture annotation supplied; keeping all %d symmetries",
            len(symmetries),
        )
        return symmetries
    keep = []
    for idx in keep_indices:
        if not 0 <= idx < len(symmetries):
            raise ValueError(
                f"texture annotation references unknown transform index {idx} "
                f"(set has {len(symmetries)} transforms)"
            )
        if idx not in keep:
            keep.append(idx)
    transforms = [symmetries.transforms[i] for i in keep]
    provenance = [symmetries.provenance[i] for i in keep]
    if not any(_is_identity(t) for t in transforms):
        transforms.insert(0, RigidTransform.identity())
        provenance.insert(0, "searched")
    return SymmetrySet(transforms, provenance)


def build_symmetry_set(mesh, annotation=None, epsilon=None,
                       max_members=4 * MAX_SET_SIZE):
    """Assemble the full symmetry set used by the pose-error functions.

    Annotated symmetries take precedence over search when present:
    ``annotation`` carries explicit discrete transforms and continuous axes
    (see :mod:`poseval.dataset_io`). Otherwise both the discrete search and
    the continuous-axis detection run.

    Because the composition of two symmetries is again a symmetry, each
    discrete transform is combined with every discretized rotation of every
    continuous axis (a flip of a cylinder exists at every rotation angle,
    not just at angle zero). Duplicates are merged; the set is capped at
    ``max_members`` with a warning.
    """
    eps = symmetry_epsilon(mesh) if epsilon is None else float(epsilon)
    translation_tol = eps / 10.0

    if annotation is not None:
        discrete = list(annotation.symmetries_discrete)
        continuous = list(annotation.symmetries_continuous)
        tag = "annotated"
    else:
        searched = find_discrete_symmetries(mesh, epsilon=eps)
        discrete = [t for t in searched if not _is_identity(t)]
        continuous = find_continuous_symmetries(mesh, epsilon=eps)
        tag = "searched"

    transforms = [RigidTransform.identity()]
    provenance = [tag]
    capped = False

    def insert(transform, transform_tag):
        nonlocal capped
        if len(transforms) >= max_members:
            capped = True
            return
        if not any(_is_duplicate(transform, s, translation_tol) for s in transforms):
            transforms.append(transform)
            provenance.append(transform_tag)

    for t in discrete:
        insert(t, tag)
    for sym in continuous:
        steps = discretize_continuous(sym, mesh)
        for step in steps:
            insert(step, "discretized-continuous")
            for t in discrete:
                insert(step.compose(t), "discretized-continuous")

    if capped:
        logger.warning(
            "symmetry set capped at %d members; consider a leaner "
            "annotation for this object", max_members
        )
    return SymmetrySet(transforms, provenance)
