"""Readers and writers for the on-disk formats of the evaluation engine.

Formats (all paths relative to a dataset root):

* ``models/obj_<id, 6 digits>.ply`` -- object models.
* ``models/models_info.json`` -- per-object annotations: ``diameter`` [mm],
  ``symmetries_discrete`` (list of 4x4 row-major matrices, 16 floats each),
  ``symmetries_continuous`` (list of ``{"axis": [x,y,z], "offset":
  [x,y,z]}``).
* ``<split>/<scene id, 6 digits>/scene_gt.json`` -- per-image ground-truth
  instances: ``{"<im_id>": [{"obj_id": int, "cam_R_m2c": [9 floats,
  row-major], "cam_t_m2c": [3 floats, mm]}, ...]}``.
* ``<split>/<scene>/scene_camera.json`` -- per-image intrinsics:
  ``{"<im_id>": {"cam_K": [9 floats], "depth_scale": float}}``.
* ``<split>/<scene>/depth/<im_id, 6 digits>.png`` -- 16-bit single-channel
  PNG; pixel value times ``depth_scale`` is depth in mm, 0 = no measurement.
* ``test_targets.json`` -- list of ``{"scene_id", "im_id", "obj_id",
  "inst_count"}`` selecting what is evaluated.
* Submission CSV with header ``scene_id,im_id,obj_id,score,R,t,time``; R
  and t are space-separated floats inside one field, t in mm, time in
  seconds (negative = not reported).

Readers reject rather than silently coerce: no NaN ever reaches scoring.
Parsing is locale-independent (decimal points only); scientific notation is
accepted on read and never emitted in CSV.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DatasetFormatError, InputError, SubmissionFormatError
from .geometry import RigidTransform, is_rotation_matrix, nearest_rotation
from .scoring import (
    MSPD_THRESHOLD_FACTORS,
    MSSD_THRESHOLD_FRACTIONS,
    VSD_TAU_FRACTIONS,
    VSD_THRESHOLDS,
    DatasetReport,
    EvaluationReport,
    PoseEstimate,
    RecallGrid,
)
from .symmetry import ContinuousSymmetry

SUBMISSION_COLUMNS = ("scene_id", "im_id", "obj_id", "score", "R", "t", "time")
ROTATION_INPUT_TOL = 1e-3
REPORT_SCHEMA = 1


def _fmt(value):
    """Positional (never scientific) decimal text that round-trips."""
    return np.format_float_positional(float(value), trim="0")


def _parse_rotation(values, tol=ROTATION_INPUT_TOL):
    """9 row-major floats -> rotation matrix, re-orthonormalized.

    External data is accepted when orthonormal within ``tol`` and of
    positive determinant. Matrices that are not already exact rotations at
    the internal tolerance are projected onto the nearest rotation
    (downstream math assumes exact rotations); already-exact input is kept
    bit-identical so that parse/serialize round-trips are stable.
    """
    m = np.asarray(values, dtype=np.float64).reshape(3, 3)
    if not np.all(np.isfinite(m)):
        raise ValueError("rotation contains non-finite values")
    if np.abs(m @ m.T - np.eye(3)).max() > tol:
        raise ValueError(f"rotation is not orthonormal within {tol:g}")
    if np.linalg.det(m) <= 0:
        raise ValueError("rotation has non-positive determinant (reflection)")
    if is_rotation_matrix(m):
        return m
    return nearest_rotation(m)


# ---------------------------------------------------------------------------
# Submission CSV
# ---------------------------------------------------------------------------


def read_submission(path):
    """Parse a pose-submission CSV into a list of estimates.

    Row order is preserved (it breaks confidence ties downstream). All
    malformed rows are collected and reported together with their line
    numbers.

    :raises SubmissionFormatError: missing columns, non-numeric fields,
        non-finite values, rotations failing orthonormality at 1e-3.
    """
    path = Path(path)
    estimates = []
    bad_rows = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SubmissionFormatError(path, [(1, "empty file")]) from None
        header = [h.strip() for h in header]
        missing = [c for c in SUBMISSION_COLUMNS if c not in header]
        if missing:
            raise SubmissionFormatError(
                path, [(1, f"missing columns: {', '.join(missing)}")]
            )
        col = {name: header.index(name) for name in SUBMISSION_COLUMNS}

        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                estimates.append(_parse_submission_row(row, col))
            except (ValueError, IndexError) as exc:
                bad_rows.append((line_no, str(exc)))
    if bad_rows:
        raise SubmissionFormatError(path, bad_rows)
    return estimates


def _parse_submission_row(row, col):
    if max(col.values()) >= len(row):
        raise ValueError(f"expected {max(col.values()) + 1} fields, got {len(row)}")
    scene_id = int(row[col["scene_id"]])
    im_id = int(row[col["im_id"]])
    obj_id = int(row[col["obj_id"]])
    score = float(row[col["score"]])
    if not np.isfinite(score):
        raise ValueError("score is not finite")
    r_values = [float(v) for v in row[col["R"]].split()]
    if len(r_values) != 9:
        raise ValueError(f"R must hold 9 values, got {len(r_values)}")
    t_values = [float(v) for v in row[col["t"]].split()]
    if len(t_values) != 3:
        raise ValueError(f"t must hold 3 values, got {len(t_values)}")
    if not np.all(np.isfinite(t_values)):
        raise ValueError("t contains non-finite values")
    rotation = _parse_rotation(r_values)
    time_value = float(row[col["time"]])
    if np.isnan(time_value):
        raise ValueError("time is NaN")
    time = None if time_value < 0 else time_value
    return PoseEstimate(
        scene_id=scene_id,
        im_id=im_id,
        obj_id=obj_id,
        pose=RigidTransform(rotation, t_values),
        score=score,
        time=time,
    )


def write_submission(path, estimates):
    """Write estimates as a submission CSV (inverse of read_submission)."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUBMISSION_COLUMNS)
        for est in estimates:
            r_text = " ".join(_fmt(v) for v in est.pose.rotation.ravel())
            t_text = " ".join(_fmt(v) for v in est.pose.translation)
            time_value = -1.0 if est.time is None else est.time
            writer.writerow(
                [
                    est.scene_id,
                    est.im_id,
                    est.obj_id,
                    _fmt(est.score),
                    r_text,
                    t_text,
                    _fmt(time_value),
                ]
            )


# ---------------------------------------------------------------------------
# Scene ground truth
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SceneCamera:
    fx: float
    fy: float
    cx: float
    cy: float
    depth_scale: float


@dataclass
class ImageGroundTruth:
    im_id: int
    camera: SceneCamera
    instances: list  # of (obj_id, RigidTransform)
    depth_path: Path | None


@dataclass
class SceneGroundTruth:
    scene_id: int
    images: dict  # im_id -> ImageGroundTruth


def _load_json(path):
    path = Path(path)
    if not path.exists():
        raise DatasetFormatError(f"missing file: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"{path}: invalid JSON ({exc})") from None


def read_scene_gt(scene_dir, scene_id=None):
    """Load ground-truth poses and cameras of one scene directory.

    Depth images are optional; their paths are recorded when present.

    :raises DatasetFormatError: missing files, malformed entries, image ids
        present in scene_gt.json but absent from scene_camera.json.
    """
    scene_dir = Path(scene_dir)
    if scene_id is None:
        try:
            scene_id = int(scene_dir.name)
        except ValueError:
            raise DatasetFormatError(
                f"cannot infer a scene id from directory name '{scene_dir.name}'"
            ) from None
    gt_raw = _load_json(scene_dir / "scene_gt.json")
    cam_raw = _load_json(scene_dir / "scene_camera.json")

    missing = sorted(set(gt_raw) - set(cam_raw), key=int)
    if missing:
        raise DatasetFormatError(
            f"{scene_dir}: image ids {missing} appear in scene_gt.json but "
            "not in scene_camera.json"
        )

    images = {}
    for im_key in sorted(gt_raw, key=int):
        im_id = int(im_key)
        cam_entry = cam_raw[im_key]
        try:
            camera = _parse_camera(cam_entry)
        except (KeyError, ValueError, TypeError) as exc:
            raise DatasetFormatError(
                f"{scene_dir}/scene_camera.json image {im_id}: {exc}"
            ) from None
        instances = []
        for k, inst in enumerate(gt_raw[im_key]):
            try:
                obj_id = int(inst["obj_id"])
                rotation = _parse_rotation(inst["cam_R_m2c"])
                translation = np.asarray(inst["cam_t_m2c"], dtype=np.float64)
                if translation.shape != (3,) or not np.all(np.isfinite(translation)):
                    raise ValueError("cam_t_m2c must hold 3 finite values")
            except (KeyError, ValueError, TypeError) as exc:
                raise DatasetFormatError(
                    f"{scene_dir}/scene_gt.json image {im_id} instance {k}: {exc}"
                ) from None
            instances.append((obj_id, RigidTransform(rotation, translation)))
        depth_path = scene_dir / "depth" / f"{im_id:06d}.png"
        images[im_id] = ImageGroundTruth(
            im_id=im_id,
            camera=camera,
            instances=instances,
            depth_path=depth_path if depth_path.exists() else None,
        )
    return SceneGroundTruth(scene_id=scene_id, images=images)


def _parse_camera(entry):
    k = np.asarray(entry["cam_K"], dtype=np.float64)
    if k.shape != (9,):
        raise ValueError("cam_K must hold 9 values (row-major 3x3)")
    fx, skew, cx, zero, fy, cy = k[0], k[1], k[2], k[3], k[4], k[5]
    if abs(skew) > 1e-6 * max(abs(fx), 1.0) or abs(zero) > 1e-6 * max(abs(fy), 1.0):
        raise ValueError("cam_K must have zero skew")
    if not np.allclose(k[6:], [0.0, 0.0, 1.0]):
        raise ValueError("cam_K bottom row must be [0, 0, 1]")
    depth_scale = float(entry.get("depth_scale", 1.0))
    if depth_scale <= 0 or not np.isfinite(depth_scale):
        raise ValueError("depth_scale must be positive")
    return SceneCamera(float(fx), float(fy), float(cx), float(cy), depth_scale)


def read_depth_image(path, depth_scale):
    """Load a 16-bit single-channel depth PNG, scaled to mm.

    :raises DatasetFormatError: wrong bit depth or channel layout.
    """
    path = Path(path)
    if not path.exists():
        raise DatasetFormatError(f"missing depth image: {path}")
    img = Image.open(path)
    if img.mode not in ("I;16", "I;16B", "I"):
        raise DatasetFormatError(
            f"{path}: depth images must be 16-bit single-channel PNG, "
            f"got mode '{img.mode}'"
        )
    values = np.asarray(img, dtype=np.float64)
    if values.ndim != 2:
        raise DatasetFormatError(f"{path}: depth image must have one channel")
    return values * float(depth_scale)


def write_depth_image(path, depth_mm, depth_scale):
    """Store a depth map [mm] as a 16-bit PNG with the given scale."""
    values = np.asarray(depth_mm, dtype=np.float64) / float(depth_scale)
    rounded = np.round(values)
    if rounded.min() < 0 or rounded.max() > 65535:
        raise ValueError("depth values exceed the 16-bit range at this scale")
    Image.fromarray(rounded.astype("<u2")).save(Path(path))


# ---------------------------------------------------------------------------
# Targets
# ---------------------------------------------------------------------------


def read_targets(path):
    """Load the per-(scene, image, object) instance counts to evaluate.

    :return: dict mapping (scene_id, im_id, obj_id) to inst_count.
    :raises DatasetFormatError: malformed entries, duplicate keys with
        conflicting counts, or an empty target list (nothing to evaluate).
    """
    path = Path(path)
    raw = _load_json(path)
    if not isinstance(raw, list):
        raise DatasetFormatError(f"{path}: targets must be a JSON list")
    if not raw:
        raise DatasetFormatError(f"{path}: empty target list; nothing to evaluate")
    targets = {}
    for k, entry in enumerate(raw):
        try:
            key = (int(entry["scene_id"]), int(entry["im_id"]), int(entry["obj_id"]))
            count = int(entry["inst_count"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DatasetFormatError(f"{path}: entry {k}: {exc}") from None
        if count < 1:
            raise DatasetFormatError(f"{path}: entry {k}: inst_count must be >= 1")
        if key in targets and targets[key] != count:
            raise DatasetFormatError(
                f"{path}: conflicting inst_count for scene {key[0]} image "
                f"{key[1]} object {key[2]}: {targets[key]} vs {count}"
            )
        targets[key] = count
    return targets


# ---------------------------------------------------------------------------
# Object annotations (models_info)
# ---------------------------------------------------------------------------


@dataclass
class ObjectAnnotation:
    """Per-object metadata: diameter and annotated symmetries."""

    diameter: float | None = None
    symmetries_discrete: list = field(default_factory=list)
    symmetries_continuous: list = field(default_factory=list)

    @property
    def has_symmetries(self):
        return bool(self.symmetries_discrete or self.symmetries_continuous)


def read_models_info(path):
    """Load per-object annotations keyed by object id.

    Unknown keys inside each entry are ignored so that richer metadata
    files remain readable.
    """
    raw = _load_json(path)
    if not isinstance(raw, dict):
        raise DatasetFormatError(f"{path}: models info must be a JSON object")
    out = {}
    for key, entry in raw.items():
        try:
            obj_id = int(key)
        except ValueError:
            raise DatasetFormatError(f"{path}: non-integer object id '{key}'") from None
        try:
            out[obj_id] = _parse_object_annotation(entry)
        except (KeyError, TypeError, ValueError) as exc:
            raise DatasetFormatError(f"{path}: object {key}: {exc}") from None
    return out


def _parse_object_annotation(entry):
    diameter = entry.get("diameter")
    if diameter is not None:
        diameter = float(diameter)
        if not np.isfinite(diameter) or diameter <= 0:
            raise ValueError("diameter must be positive")
    discrete = []
    for mat in entry.get("symmetries_discrete", []):
        m = np.asarray(mat, dtype=np.float64).reshape(4, 4)
        rotation = _parse_rotation(m[:3, :3].ravel())
        if not np.allclose(m[3], [0, 0, 0, 1]):
            raise ValueError("symmetry matrix bottom row must be [0, 0, 0, 1]")
        discrete.append(RigidTransform(rotation, m[:3, 3]))
    continuous = []
    for sym in entry.get("symmetries_continuous", []):
        axis = np.asarray(sym["axis"], dtype=np.float64)
        norm = np.linalg.norm(axis)
        if norm == 0:
            raise ValueError("continuous symmetry axis must be non-zero")
        continuous.append(
            ContinuousSymmetry(axis / norm, np.asarray(sym["offset"], dtype=np.float64))
        )
    return ObjectAnnotation(
        diameter=diameter,
        symmetries_discrete=discrete,
        symmetries_continuous=continuous,
    )


def write_models_info(path, annotations, extras=None):
    """Write per-object annotations (inverse of :func:`read_models_info`).

    ``extras`` optionally maps object ids to additional JSON-serializable
    entries merged into each object record (e.g. provenance notes).
    """
    payload = {}
    for obj_id, ann in sorted(annotations.items()):
        entry = {}
        if ann.diameter is not None:
            entry["diameter"] = ann.diameter
        if ann.symmetries_discrete:
            entry["symmetries_discrete"] = [
                [float(v) for v in t.matrix().ravel()]
                for t in ann.symmetries_discrete
            ]
        if ann.symmetries_continuous:
            entry["symmetries_continuous"] = [
                {
                    "axis": [float(v) for v in s.axis],
                    "offset": [float(v) for v in s.offset],
                }
                for s in ann.symmetries_continuous
            ]
        if extras and obj_id in extras:
            entry.update(extras[obj_id])
        payload[str(obj_id)] = entry
    _dump_json(path, payload)


def read_texture_filter(path):
    """Load a manual texture keep-list: object id -> retained indices."""
    raw = _load_json(path)
    if not isinstance(raw, dict):
        raise DatasetFormatError(f"{path}: texture filter must be a JSON object")
    out = {}
    for key, indices in raw.items():
        try:
            out[int(key)] = [int(i) for i in indices]
        except (TypeError, ValueError) as exc:
            raise DatasetFormatError(f"{path}: object {key}: {exc}") from None
    return out


def model_path(root, obj_id):
    return Path(root) / "models" / f"obj_{obj_id:06d}.ply"


def models_info_path(root):
    return Path(root) / "models" / "models_info.json"


def scene_dir(root, split, scene_id):
    return Path(root) / split / f"{scene_id:06d}"


def list_scene_ids(root, split):
    base = Path(root) / split
    if not base.is_dir():
        raise DatasetFormatError(f"missing split directory: {base}")
    ids = []
    for child in sorted(base.iterdir()):
        if child.is_dir() and child.name.isdigit():
            ids.append(int(child.name))
    return ids


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def _dump_json(path, payload):
    with open(Path(path), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _grid_to_dict(grid):
    if grid is None:
        return None
    out = {
        "function": grid.function,
        "thresholds": grid.thresholds,
        "recalls": grid.recalls,
    }
    if grid.taus is not None:
        out["taus"] = grid.taus
    return out


def _grid_from_dict(data):
    if data is None:
        return None
    return RecallGrid(
        function=data["function"],
        thresholds=data["thresholds"],
        recalls=data["recalls"],
        taus=data.get("taus"),
    )


def report_to_dict(report):
    return {
        "schema": report.schema,
        "ar_core": report.ar_core,
        "mean_image_time": report.mean_image_time,
        "diagnostics": report.diagnostics,
        "datasets": [
            {
                "name": d.name,
                "ar": d.ar,
                "ar_vsd": d.ar_vsd,
                "ar_mssd": d.ar_mssd,
                "ar_mspd": d.ar_mspd,
                "gt_count": d.gt_count,
                "mean_image_time": d.mean_image_time,
                "vsd_grid": _grid_to_dict(d.vsd_grid),
                "mssd_grid": _grid_to_dict(d.mssd_grid),
                "mspd_grid": _grid_to_dict(d.mspd_grid),
            }
            for d in report.datasets
        ],
    }


def report_from_dict(data):
    if data.get("schema") != REPORT_SCHEMA:
        raise DatasetFormatError(
            f"unsupported report schema {data.get('schema')!r}; expected "
            f"{REPORT_SCHEMA}"
        )
    datasets = [
        DatasetReport(
            name=d["name"],
            ar=d["ar"],
            ar_vsd=d.get("ar_vsd"),
            ar_mssd=d.get("ar_mssd"),
            ar_mspd=d.get("ar_mspd"),
            gt_count=d.get("gt_count", 0),
            mean_image_time=d.get("mean_image_time"),
            vsd_grid=_grid_from_dict(d.get("vsd_grid")),
            mssd_grid=_grid_from_dict(d.get("mssd_grid")),
            mspd_grid=_grid_from_dict(d.get("mspd_grid")),
        )
        for d in data["datasets"]
    ]
    return EvaluationReport(
        datasets=datasets,
        ar_core=data["ar_core"],
        mean_image_time=data.get("mean_image_time"),
        diagnostics=list(data.get("diagnostics", [])),
    )


def _percent(value):
    return "-" if value is None else f"{100.0 * value:.1f}"


def _seconds(value):
    return "-" if value is None else f"{value:.2f}"


def format_report_table(report):
    """Human-readable score table; percentages with one decimal."""
    header = f"{'dataset':<16}{'AR_VSD':>8}{'AR_MSSD':>9}{'AR_MSPD':>9}{'AR':>8}{'time[s]':>9}"
    lines = [header, "-" * len(header)]
    for d in report.datasets:
        lines.append(
            f"{d.name:<16}{_percent(d.ar_vsd):>8}{_percent(d.ar_mssd):>9}"
            f"{_percent(d.ar_mspd):>9}{_percent(d.ar):>8}"
            f"{_seconds(d.mean_image_time):>9}"
        )
    lines.append("-" * len(header))
    lines.append(
        f"{'overall':<16}{'':>8}{'':>9}{'':>9}{_percent(report.ar_core):>8}"
        f"{_seconds(report.mean_image_time):>9}"
    )
    return "\n".join(lines) + "\n"


def write_report(report, out_dir):
    """Write ``report.json`` (machine-readable, full grids) and
    ``report.txt`` (score table) into ``out_dir``.

    :return: dict with the written paths.
    """
    if not report.datasets:
        raise ValueError("cannot write a report without datasets")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / "report.json"
    txt_path = out_dir / "report.txt"
    _dump_json(json_path, report_to_dict(report))
    with open(txt_path, "w", encoding="utf-8") as fh:
        fh.write(format_report_table(report))
    return {"json": json_path, "table": txt_path}


def read_report(json_path):
    """Re-load a report written by :func:`write_report`."""
    return report_from_dict(_load_json(json_path))


# ---------------------------------------------------------------------------
# Evaluation configuration
# ---------------------------------------------------------------------------


@dataclass
class EvalConfig:
    """Everything an evaluation run needs besides the submission itself."""

    datasets: dict  # name -> dataset root
    targets_path: Path | None = None  # default: <root>/test_targets.json
    split: str = "test"
    visibility_delta: float = 15.0  # mm
    visibility_threshold: float = 0.1
    near_plane: float = 10.0  # mm
    extend_est_mask: bool = True
    workers: int | None = None  # None = available cores
    image_size: tuple | None = None  # (width, height) when depth is absent
    tau_fractions: tuple = VSD_TAU_FRACTIONS
    vsd_thresholds: tuple = VSD_THRESHOLDS
    mssd_fractions: tuple = MSSD_THRESHOLD_FRACTIONS
    mspd_factors: tuple = MSPD_THRESHOLD_FACTORS

    def __post_init__(self):
        self.datasets = {str(k): Path(v) for k, v in dict(self.datasets).items()}
        if not self.datasets:
            raise InputError("at least one dataset is required")
        if self.targets_path is not None:
            self.targets_path = Path(self.targets_path)
        if not 0.0 < self.visibility_threshold <= 1.0:
            raise InputError("visibility threshold must lie in (0, 1]")
        if self.visibility_delta <= 0:
            raise InputError("visibility delta must be positive")
        if self.near_plane <= 0:
            raise InputError("near plane must be positive")
        if self.workers is not None and self.workers < 1:
            raise InputError("workers must be >= 1")
        for name in ("tau_fractions", "vsd_thresholds", "mssd_fractions",
                     "mspd_factors"):
            grid = tuple(float(v) for v in getattr(self, name))
            if not grid:
                raise InputError(f"{name} must be non-empty")
            setattr(self, name, grid)
        if self.image_size is not None:
            w, h = self.image_size
            self.image_size = (int(w), int(h))

    @classmethod
    def from_file(cls, path, **overrides):
        raw = _load_json(path)
        if not isinstance(raw, dict):
            raise InputError(f"{path}: config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise InputError(f"{path}: unknown config keys: {sorted(unknown)}")
        raw.update({k: v for k, v in overrides.items() if v is not None})
        if "datasets" not in raw:
            raise InputError(f"{path}: config lacks 'datasets'")
        return cls(**raw)

    def targets_path_for(self, dataset_root):
        if self.targets_path is not None:
            return self.targets_path
        return Path(dataset_root) / "test_targets.json"
