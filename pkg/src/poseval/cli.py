"""Command-line entry points.

Subcommands:

* ``evaluate``   -- score a submission against one or more datasets.
* ``symmetries`` -- analyze a mesh and write a symmetry annotation file.
* ``report``     -- render the score table of an existing report.json.
* ``selftest``   -- cross-check the fast implementations against the naive
  reference implementations on generated fixtures.

Progress and warnings go to standard error; machine-readable output goes to
files or standard output. Exit codes: 0 success, 1 input error, 2 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .dataset_io import (
    EvalConfig,
    ObjectAnnotation,
    format_report_table,
    read_report,
    read_texture_filter,
    write_models_info,
)
from .errors import InputError, PosevalError
from .geometry import CameraIntrinsics, RigidTransform, load_mesh, rotation_about_point
from .pipeline import evaluate_submissions
from .pose_error import mspd, mssd, vsd
from .symmetry import (
    filter_by_texture,
    find_continuous_symmetries,
    find_discrete_symmetries,
    hausdorff,
    symmetry_epsilon,
)
from . import reference

logger = logging.getLogger("poseval")

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_INTERNAL_ERROR = 2


def _parse_named_paths(pairs, flag, allow_bare=False):
    """Parse repeatable ``name=path`` flags into a dict."""
    out = {}
    for item in pairs:
        if "=" in item:
            name, path = item.split("=", 1)
        elif allow_bare:
            name, path = None, item
        else:
            raise InputError(f"{flag} must look like name=path, got '{item}'")
        if name in out:
            raise InputError(f"duplicate {flag} entry '{name}'")
        out[name] = Path(path)
    return out


def _cmd_evaluate(args):
    overrides = {}
    if args.dataset:
        overrides["datasets"] = {
            k: str(v) for k, v in _parse_named_paths(args.dataset, "--dataset").items()
        }
    if args.targets:
        overrides["targets_path"] = args.targets
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.vsd_delta is not None:
        overrides["visibility_delta"] = args.vsd_delta
    if args.visib_threshold is not None:
        overrides["visibility_threshold"] = args.visib_threshold

    if args.config:
        config = EvalConfig.from_file(args.config, **overrides)
    else:
        if "datasets" not in overrides:
            raise InputError("either --config or --dataset is required")
        config = EvalConfig(**overrides)

    submissions = _parse_named_paths(args.submission, "--submission", allow_bare=True)
    if None in submissions:
        if len(config.datasets) != 1:
            raise InputError(
                "a bare --submission path only works with a single dataset; "
                "use --submission name=path"
            )
        only = next(iter(config.datasets))
        submissions[only] = submissions.pop(None)

    report = evaluate_submissions(config, submissions, out_dir=args.out)
    sys.stdout.write(format_report_table(report))
    if args.out:
        logger.info("report written to %s", args.out)
    return EXIT_OK


def _drop_rotations_about_axes(transforms, axes, tol_deg=1.0):
    """Remove rotations whose axis parallels a continuous symmetry axis.

    A detected continuous axis subsumes every discrete rotation about it,
    so listing those rotations in the annotation would be redundant (the
    scoring layer re-discretizes the axis anyway).
    """
    from scipy.spatial.transform import Rotation

    cos_tol = np.cos(np.deg2rad(tol_deg))
    kept = []
    for t in transforms:
        rotvec = Rotation.from_matrix(t.rotation).as_rotvec()
        norm = np.linalg.norm(rotvec)
        direction = rotvec / norm if norm > 0 else None
        subsumed = direction is not None and any(
            abs(direction @ axis.axis) > cos_tol for axis in axes
        )
        if not subsumed:
            kept.append(t)
    return kept


def _cmd_symmetries(args):
    mesh = load_mesh(args.model)
    eps = args.epsilon if args.epsilon is not None else symmetry_epsilon(mesh)
    logger.info(
        "mesh: %d vertices, diameter %.3f mm, epsilon %.3f mm",
        len(mesh.vertices), mesh.diameter, eps,
    )
    t0 = time.monotonic()
    discrete = find_discrete_symmetries(mesh, epsilon=eps)
    continuous = find_continuous_symmetries(mesh, epsilon=eps)
    logger.info(
        "found %d discrete transforms and %d continuous axes in %.1f s",
        len(discrete), len(continuous), time.monotonic() - t0,
    )

    if args.texture_filter:
        keep = read_texture_filter(args.texture_filter).get(args.obj_id)
        discrete = filter_by_texture(discrete, keep)

    # The identity is implied by the set; rotations about a detected
    # continuous axis are subsumed by that axis.
    discrete_out = [
        t for t in discrete.transforms
        if not np.allclose(t.matrix(), np.eye(4), atol=1e-9)
    ]
    if continuous:
        before = len(discrete_out)
        discrete_out = _drop_rotations_about_axes(discrete_out, continuous)
        if len(discrete_out) != before:
            logger.info(
                "dropped %d discrete rotations subsumed by continuous axes",
                before - len(discrete_out),
            )
    annotation = ObjectAnnotation(
        diameter=mesh.diameter,
        symmetries_discrete=discrete_out,
        symmetries_continuous=continuous,
    )
    extras = {
        args.obj_id: {
            "provenance": {
                "symmetries_discrete": "searched",
                "symmetries_continuous": "searched",
            },
            "note": (
                "review required: keep only symmetries the object texture "
                "cannot resolve (manual decision)"
            ),
        }
    }
    write_models_info(args.out, {args.obj_id: annotation}, extras=extras)
    sys.stderr.write(
        f"NOTE: texture review is a manual step; edit {args.out} to drop "
        "symmetries that the texture disambiguates.\n"
    )
    logger.info("annotation written to %s", args.out)
    return EXIT_OK


def _cmd_report(args):
    report = read_report(args.report)
    sys.stdout.write(format_report_table(report))
    return EXIT_OK


# -- selftest ----------------------------------------------------------------


def _selftest_vsd(rng):
    for _ in range(20):
        h, w = rng.integers(4, 12, size=2)
        est = np.where(rng.random((h, w)) < 0.7, rng.uniform(100, 1000, (h, w)), 0)
        gt = np.where(rng.random((h, w)) < 0.7, rng.uniform(100, 1000, (h, w)), 0)
        est_mask = (est > 0) & (rng.random((h, w)) < 0.8)
        gt_mask = (gt > 0) & (rng.random((h, w)) < 0.8)
        if not (est_mask | gt_mask).any():
            gt_mask[0, 0] = True
            gt[0, 0] = 500.0
        taus = np.sort(rng.uniform(1.0, 500.0, size=5))
        fast = vsd(est, gt, est_mask, gt_mask, taus)
        slow, _, _ = reference.vsd_pixel_loop(est, gt, est_mask, gt_mask, taus)
        if np.abs(fast - slow).max() > 1e-12:
            return False
    return True


def _random_pose(rng, z=600.0):
    axis = rng.normal(size=3)
    pose = rotation_about_point(axis / np.linalg.norm(axis), rng.uniform(0, np.pi), (0, 0, 0))
    return RigidTransform(pose.rotation, rng.uniform(-50, 50, 3) + [0, 0, z])


def _selftest_surface_errors(rng):
    from .shapes import cube
    from .symmetry import build_symmetry_set

    mesh = cube(200.0)
    syms = build_symmetry_set(mesh)
    cam = CameraIntrinsics(500.0, 500.0, 320.0, 240.0, 640, 480)
    verts = mesh.vertices
    for _ in range(5):
        est, gt = _random_pose(rng), _random_pose(rng)
        if abs(mssd(est, gt, syms, verts) - reference.mssd_triple_loop(est, gt, syms, verts)) > 1e-9:
            return False
        if abs(mspd(est, gt, syms, verts, cam) - reference.mspd_triple_loop(est, gt, syms, verts, cam)) > 1e-6:
            return False
    return True


def _selftest_hausdorff(rng):
    for _ in range(10):
        a = rng.uniform(-100, 100, size=(rng.integers(2, 60), 3))
        b = rng.uniform(-100, 100, size=(rng.integers(2, 60), 3))
        if abs(hausdorff(a, b) - reference.hausdorff_double_loop(a, b)) > 1e-12:
            return False
    return True


def _selftest_raster(rng):
    from .raster import render_distance_map
    from .geometry import TriangleMesh

    for _ in range(5):
        verts = rng.uniform(-80, 80, size=(3, 3)) + [0, 0, 600]
        mesh = TriangleMesh(verts, [(0, 1, 2)])
        cam = CameraIntrinsics(120.0, 120.0, 32.0, 32.0, 64, 64)
        fast = render_distance_map(mesh, RigidTransform.identity(), cam)
        slow = reference.raycast_distance_map(mesh, RigidTransform.identity(), cam)
        covered = fast > 0
        if covered.any():
            if not (slow[covered] > 0).all():
                return False
            if np.abs(fast[covered] - slow[covered]).max() > 0.1:
                return False
    return True


def _cmd_selftest(_args):
    rng = np.random.default_rng(20200819)
    checks = [
        ("vsd vs per-pixel double loop", _selftest_vsd),
        ("mssd/mspd vs triple loop", _selftest_surface_errors),
        ("hausdorff vs double loop", _selftest_hausdorff),
        ("rasterizer vs ray casting", _selftest_raster),
    ]
    failed = False
    for name, check in checks:
        t0 = time.monotonic()
        ok = check(rng)
        status = "PASS" if ok else "FAIL"
        print(f"{name:<36} {status}  ({time.monotonic() - t0:.2f} s)")
        failed = failed or not ok
    return EXIT_INTERNAL_ERROR if failed else EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="poseval",
        description="Evaluation engine for 6D object localization",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("evaluate", help="score a pose submission")
    p_eval.add_argument("--config", type=Path, help="EvalConfig JSON file")
    p_eval.add_argument(
        "--submission", action="append", default=[], required=True,
        help="submission CSV; repeatable as name=path for multiple datasets",
    )
    p_eval.add_argument(
        "--dataset", action="append", default=[],
        help="dataset root as name=path; repeatable",
    )
    p_eval.add_argument("--targets", type=Path, help="target list JSON")
    p_eval.add_argument("--out", type=Path, help="directory for report files")
    p_eval.add_argument("--workers", type=int)
    p_eval.add_argument("--vsd-delta", type=float, dest="vsd_delta",
                        help="visibility tolerance [mm]")
    p_eval.add_argument("--visib-threshold", type=float, dest="visib_threshold",
                        help="minimum visible fraction of scored instances")
    p_eval.set_defaults(func=_cmd_evaluate)

    p_sym = sub.add_parser("symmetries", help="find symmetries of a mesh")
    p_sym.add_argument("model", type=Path, help="PLY mesh file")
    p_sym.add_argument("--epsilon", type=float, help="override tolerance [mm]")
    p_sym.add_argument("--obj-id", type=int, default=1, dest="obj_id")
    p_sym.add_argument("--texture-filter", type=Path, dest="texture_filter",
                       help="manual keep-list JSON")
    p_sym.add_argument("--out", type=Path, required=True,
                       help="annotation JSON to write")
    p_sym.set_defaults(func=_cmd_symmetries)

    p_rep = sub.add_parser("report", help="print the table of a report.json")
    p_rep.add_argument("report", type=Path)
    p_rep.set_defaults(func=_cmd_report)

    p_self = sub.add_parser("selftest", help="run bundled oracle checks")
    p_self.set_defaults(func=_cmd_selftest)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help and 2 for usage errors; usage errors
        # are input errors under this tool's exit-code contract.
        return EXIT_OK if exc.code == 0 else EXIT_INPUT_ERROR
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except InputError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT_ERROR
    except FileNotFoundError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT_ERROR
    except PosevalError as exc:
        sys.stderr.write(f"internal error: {exc}\n")
        return EXIT_INTERNAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
