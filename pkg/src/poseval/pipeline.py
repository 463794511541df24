"""End-to-end evaluation: datasets + submission in, score report out.

The flow per dataset: read the target list and the submission, keep the
top-n estimates per (scene, image, object), render ground-truth and
estimated distance maps, derive visibility masks and visible fractions,
drop ground-truth instances below the visibility threshold, compute
VSD/MSSD/MSPD error tables, match estimates to instances per threshold
setting, and accumulate recall grids.

Images are independent work units; with ``workers > 1`` they are processed
in a process pool. Results are reduced in sorted image order, so reports
are identical for any worker count.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dataset_io import (
    model_path,
    models_info_path,
    read_depth_image,
    read_models_info,
    read_scene_gt,
    read_submission,
    read_targets,
    scene_dir,
    write_report,
)
from .errors import DatasetFormatError, InternalCheckError, VertexBehindCamera
from .geometry import CameraIntrinsics, load_mesh
from .pose_error import mspd, mssd, vsd
from .raster import depth_to_distance, render_distance_map
from .scoring import (
    DatasetAccumulator,
    DatasetReport,
    GroundTruthInstance,
    aggregate_report,
    select_top_n,
)
from .symmetry import SymmetrySet, build_symmetry_set
from .visibility import (
    est_visibility_mask_extended,
    visibility_mask,
    visible_fraction,
)

logger = logging.getLogger(__name__)


@dataclass
class GroupResult:
    """Error tables of one (image, object) group."""

    obj_id: int
    scores: np.ndarray          # submission-order confidences, shape (k,)
    mssd_errors: np.ndarray     # (k, g) [mm]
    mspd_errors: np.ndarray     # (k, g) [px]
    vsd_errors: np.ndarray | None  # (k, g, n_tau), None = VSD disabled
    diameter: float
    image_width: int
    n_gts: int


@dataclass
class ImageResult:
    scene_id: int
    im_id: int
    groups: list
    diagnostics: list


class DatasetContext:
    """Lazily loaded per-dataset state (meshes, symmetry sets, scenes).

    Workers build their own context from paths, so heavyweight objects are
    never pickled.
    """

    def __init__(self, name, root, config):
        self.name = name
        self.root = root
        self.config = config
        info_path = models_info_path(root)
        self.annotations = read_models_info(info_path) if info_path.exists() else {}
        self._meshes = {}
        self._symmetries = {}
        self._scenes = {}

    def mesh(self, obj_id):
        if obj_id not in self._meshes:
            path = model_path(self.root, obj_id)
            if not path.exists():
                raise DatasetFormatError(
                    f"dataset {self.name}: missing model file {path}"
                )
            self._meshes[obj_id] = load_mesh(path)
        return self._meshes[obj_id]

    def diameter(self, obj_id):
        ann = self.annotations.get(obj_id)
        if ann is not None and ann.diameter is not None:
            return ann.diameter
        return self.mesh(obj_id).diameter

    def symmetries(self, obj_id):
        if obj_id not in self._symmetries:
            ann = self.annotations.get(obj_id)
            if ann is not None and ann.has_symmetries:
                sym_set = build_symmetry_set(self.mesh(obj_id), annotation=ann)
            elif ann is not None:
                # Annotated object without symmetries: identity only.
                sym_set = SymmetrySet.identity_only("annotated")
            else:
                logger.warning(
                    "dataset %s object %d has no annotation; running the "
                    "symmetry search", self.name, obj_id,
                )
                sym_set = build_symmetry_set(self.mesh(obj_id))
            self._symmetries[obj_id] = sym_set
        return self._symmetries[obj_id]

    def scene(self, scene_id):
        if scene_id not in self._scenes:
            self._scenes[scene_id] = read_scene_gt(
                scene_dir(self.root, self.config.split, scene_id), scene_id
            )
        return self._scenes[scene_id]

    # -- per-image processing ------------------------------------------------

    def process_image(self, scene_id, im_id, estimates_by_obj, vsd_enabled):
        config = self.config
        scene = self.scene(scene_id)
        if im_id not in scene.images:
            raise DatasetFormatError(
                f"dataset {self.name}: scene {scene_id} has no image {im_id} "
                "(targets and scene_gt.json disagree)"
            )
        image = scene.images[im_id]
        diagnostics = []

        depth = None
        if image.depth_path is not None:
            depth = read_depth_image(image.depth_path, image.camera.depth_scale)
            height, width = depth.shape
        elif config.image_size is not None:
            width, height = config.image_size
        else:
            raise DatasetFormatError(
                f"dataset {self.name}: image {im_id} has no depth image and "
                "no image_size is configured; the image size is unknown"
            )
        c = image.camera
        cam = CameraIntrinsics(c.fx, c.fy, c.cx, c.cy, width, height)
        if depth is not None:
            measured = depth_to_distance(depth, cam)
        else:
            measured = np.zeros((height, width))

        groups = []
        for obj_id in sorted(estimates_by_obj):
            group, notes = self._process_group(
                scene_id, im_id, obj_id, estimates_by_obj[obj_id],
                image, cam, measured, vsd_enabled,
            )
            groups.append(group)
            diagnostics.extend(notes)
        return ImageResult(scene_id, im_id, groups, diagnostics)

    def _process_group(
        self, scene_id, im_id, obj_id, estimates, image, cam, measured,
        vsd_enabled,
    ):
        config = self.config
        mesh = self.mesh(obj_id)
        delta = config.visibility_delta
        notes = []

        gts = []
        gt_renders = []
        gt_masks = []
        for gt_obj, pose in image.instances:
            if gt_obj != obj_id:
                continue
            gt_dist = render_distance_map(mesh, pose, cam, config.near_plane)
            gt_mask = visibility_mask(gt_dist, measured, delta)
            fraction = visible_fraction(gt_mask, gt_dist)
            if fraction < config.visibility_threshold:
                continue
            gts.append(
                GroundTruthInstance(scene_id, im_id, obj_id, pose, fraction)
            )
            gt_renders.append(gt_dist)
            gt_masks.append(gt_mask)

        n_est = len(estimates)
        n_gts = len(gts)
        scores = np.array([e.score for e in estimates], dtype=np.float64)
        mssd_errors = np.zeros((n_est, n_gts))
        mspd_errors = np.zeros((n_est, n_gts))
        taus = np.asarray(config.tau_fractions) * self.diameter(obj_id)
        vsd_errors = (
            np.zeros((n_est, n_gts, len(taus))) if vsd_enabled else None
        )

        symmetries = self.symmetries(obj_id)
        verts = mesh.vertices
        for i, est in enumerate(estimates):
            est_dist = None
            if vsd_enabled and n_gts:
                est_dist = render_distance_map(
                    mesh, est.pose, cam, config.near_plane
                )
            for j, gt in enumerate(gts):
                mssd_errors[i, j] = mssd(est.pose, gt.pose, symmetries, verts)
                try:
                    mspd_errors[i, j] = mspd(
                        est.pose, gt.pose, symmetries, verts, cam
                    )
                except VertexBehindCamera as exc:
                    mspd_errors[i, j] = np.inf
                    notes.append(
                        f"dataset {self.name} scene {scene_id} image {im_id} "
                        f"object {obj_id} estimate {i}: {exc}; judged "
                        "incorrect at all thresholds"
                    )
                if vsd_enabled:
                    if config.extend_est_mask:
                        est_mask = est_visibility_mask_extended(
                            est_dist, measured, gt_masks[j], delta
                        )
                    else:
                        est_mask = visibility_mask(est_dist, measured, delta)
                    try:
                        vsd_errors[i, j, :] = vsd(
                            est_dist, gt_renders[j], est_mask, gt_masks[j], taus
                        )
                    except ValueError as exc:
                        raise InternalCheckError(
                            f"VSD precondition violated for dataset "
                            f"{self.name} scene {scene_id} image {im_id} "
                            f"object {obj_id} estimate {i} gt {j}: {exc}"
                        ) from exc
        group = GroupResult(
            obj_id=obj_id,
            scores=scores,
            mssd_errors=mssd_errors,
            mspd_errors=mspd_errors,
            vsd_errors=vsd_errors,
            diameter=self.diameter(obj_id),
            image_width=cam.width,
            n_gts=n_gts,
        )
        return group, notes


_WORKER_CONTEXT = None


def _init_worker(name, root, config):
    global _WORKER_CONTEXT
    _WORKER_CONTEXT = DatasetContext(name, root, config)


def _run_image_task(args):
    scene_id, im_id, estimates_by_obj, vsd_enabled = args
    result = _WORKER_CONTEXT.process_image(
        scene_id, im_id, estimates_by_obj, vsd_enabled
    )
    return (scene_id, im_id), result


def _image_times(estimates, targeted_images, dataset, diagnostics):
    """Per-image processing time: max over rows, warning when they differ."""
    times_by_image = {}
    for est in estimates:
        key = (est.scene_id, est.im_id)
        if key in targeted_images and est.time is not None:
            times_by_image.setdefault(key, []).append(est.time)
    per_image = []
    for key in sorted(times_by_image):
        values = times_by_image[key]
        if len(set(values)) > 1:
            message = (
                f"dataset {dataset} scene {key[0]} image {key[1]}: rows "
                f"report differing times {sorted(set(values))}; using the "
                "maximum"
            )
            logger.warning(message)
            diagnostics.append(message)
        per_image.append(max(values))
    return float(np.mean(per_image)) if per_image else None


def evaluate_dataset(name, root, submission_path, config):
    """Evaluate one submission file against one dataset.

    :return: (DatasetReport, diagnostics list)
    """
    diagnostics = []
    targets = read_targets(config.targets_path_for(root))
    estimates = read_submission(submission_path)
    kept = select_top_n(estimates, targets)

    targeted_images = sorted({(s, i) for (s, i, _) in targets})
    targeted_objs = {}
    for s, i, o in targets:
        targeted_objs.setdefault((s, i), set()).add(o)

    # One scene read up-front decides depth availability for the dataset.
    context = DatasetContext(name, root, config)
    missing_depth = []
    for s, i in targeted_images:
        scene = context.scene(s)
        if i not in scene.images:
            raise DatasetFormatError(
                f"dataset {name}: targets reference scene {s} image {i} which "
                "is not in scene_gt.json"
            )
        if scene.images[i].depth_path is None:
            missing_depth.append((s, i))
    vsd_enabled = not missing_depth
    if missing_depth:
        message = (
            f"dataset {name}: no depth for images {missing_depth}; VSD is "
            "skipped for this dataset"
        )
        logger.warning(message)
        diagnostics.append(message)

    kept_by_image = {key: {} for key in targeted_images}
    for est in kept:
        key = (est.scene_id, est.im_id)
        kept_by_image[key].setdefault(est.obj_id, []).append(est)
    # Groups with targets but no estimates still count their GTs.
    for (s, i), objs in targeted_objs.items():
        for o in objs:
            kept_by_image[(s, i)].setdefault(o, [])

    tasks = [
        (s, i, kept_by_image[(s, i)], vsd_enabled) for s, i in targeted_images
    ]
    workers = config.workers or os.cpu_count() or 1
    results = {}
    if workers <= 1 or len(tasks) <= 1:
        for task in tasks:
            results[(task[0], task[1])] = context.process_image(*task)
    else:
        with ProcessPoolExecutor(
            max_workers=min(workers, len(tasks)),
            initializer=_init_worker,
            initargs=(name, root, config),
        ) as pool:
            for key, result in pool.map(_run_image_task, tasks):
                results[key] = result

    accumulator = DatasetAccumulator(
        tau_fractions=config.tau_fractions,
        vsd_thresholds=config.vsd_thresholds,
        mssd_fractions=config.mssd_fractions,
        mspd_factors=config.mspd_factors,
    )
    for key in targeted_images:
        image_result = results[key]
        diagnostics.extend(image_result.diagnostics)
        for group in image_result.groups:
            accumulator.add_group(
                scores=group.scores,
                mssd_errors=group.mssd_errors,
                mspd_errors=group.mspd_errors,
                vsd_errors=group.vsd_errors,
                diameter=group.diameter,
                image_width=group.image_width,
                n_gts=group.n_gts,
            )

    mean_time = _image_times(estimates, set(targeted_images), name, diagnostics)
    report = DatasetReport.from_accumulator(name, accumulator, mean_time)
    return report, diagnostics


def evaluate_submissions(config, submissions, out_dir=None):
    """Run the full evaluation and optionally write the report files.

    :param config: EvalConfig naming the datasets.
    :param submissions: mapping dataset name -> submission CSV path.
    :return: EvaluationReport.
    """
    missing = sorted(set(config.datasets) - set(submissions))
    if missing:
        raise DatasetFormatError(
            f"no submission supplied for datasets: {', '.join(missing)}"
        )
    reports = []
    diagnostics = []
    for name in sorted(config.datasets):
        report, notes = evaluate_dataset(
            name, config.datasets[name], submissions[name], config
        )
        reports.append(report)
        diagnostics.extend(notes)
    full_report = aggregate_report(reports, diagnostics)
    if out_dir is not None:
        write_report(full_report, out_dir)
    return full_report
