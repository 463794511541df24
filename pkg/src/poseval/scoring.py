"""Matching of pose estimates to ground truth and average-recall scoring.

A pose estimate is correct w.r.t. an error function e and threshold theta
when e < theta. Recall is the fraction of annotated instances (those at
least 10% visible) with a correct estimate. The average recall of a method
on a dataset sweeps thresholds: VSD over a 10 x 10 grid of misalignment
tolerances (5%..50% of the object diameter) and thresholds (0.05..0.5);
MSSD over thresholds 5%..50% of the diameter; MSPD over 5r..50r pixels with
r = image_width / 640. The per-dataset score is the mean of the three
averages, and the overall score is the unweighted mean over datasets.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .geometry import RigidTransform

logger = logging.getLogger(__name__)

VSD_TAU_FRACTIONS = tuple(k / 20.0 for k in range(1, 11))   # of diameter
VSD_THRESHOLDS = tuple(k / 20.0 for k in range(1, 11))      # of e_VSD
MSSD_THRESHOLD_FRACTIONS = tuple(k / 20.0 for k in range(1, 11))  # of diameter
MSPD_THRESHOLD_FACTORS = tuple(5.0 * k for k in range(1, 11))     # times r
MSPD_REFERENCE_WIDTH = 640.0
VISIBILITY_FRACTION_MIN = 0.1


@dataclass(frozen=True)
class GroundTruthInstance:
    scene_id: int
    im_id: int
    obj_id: int
    pose: RigidTransform
    visible_fraction: float

    def __post_init__(self):
        if not 0.0 <= self.visible_fraction <= 1.0:
            raise ValueError("visible_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class PoseEstimate:
    scene_id: int
    im_id: int
    obj_id: int
    pose: RigidTransform
    score: float
    time: float | None = None  # seconds; None = not reported

    def __post_init__(self):
        if not np.isfinite(self.score):
            raise ValueError("confidence score must be finite")
        if self.time is not None and self.time < 0:
            raise ValueError("processing time must be >= 0 or None")


def select_top_n(estimates, targets):
    """Keep, per (scene, image, object), the n highest-score estimates.

    ``targets`` maps (scene_id, im_id, obj_id) to the instance count n.
    Score ties are broken by input order (earlier rows win); supplying
    fewer than n estimates is allowed. Estimates for keys absent from the
    target list are dropped. Input order is preserved among the kept rows.
    """
    by_key = {}
    for idx, est in enumerate(estimates):
        key = (est.scene_id, est.im_id, est.obj_id)
        if key in targets:
            by_key.setdefault(key, []).append(idx)
    keep = set()
    for key, indices in by_key.items():
        n = targets[key]
        scores = np.array([estimates[i].score for i in indices])
        order = np.argsort(-scores, kind="stable")
        keep.update(indices[i] for i in order[:n])
    return [est for i, est in enumerate(estimates) if i in keep]


def greedy_match(scores, errors, threshold):
    """Greedy confidence-ordered assignment of estimates to GT instances.

    Estimates are visited in descending score (ties by input order). Each
    estimate takes the still-unmatched GT with the smallest error, provided
    that error < threshold; each GT and each estimate match at most once.

    :param scores: (k,) confidence scores in input (file) order.
    :param errors: (k, g) error table; NaN or inf never matches.
    :return: boolean (g,) array, True where the GT got a correct estimate.
    """
    scores = np.asarray(scores, dtype=np.float64)
    errors = np.asarray(errors, dtype=np.float64)
    if errors.ndim != 2 or errors.shape[0] != scores.shape[0]:
        raise ValueError("errors must be (n_estimates, n_gts)")
    n_gts = errors.shape[1]
    correct = np.zeros(n_gts, dtype=bool)
    if n_gts == 0 or scores.size == 0:
        return correct
    matched = np.zeros(n_gts, dtype=bool)
    for i in np.argsort(-scores, kind="stable"):
        row = np.where(matched, np.inf, errors[i])
        row = np.where(np.isnan(row), np.inf, row)
        j = int(np.argmin(row))
        if row[j] < threshold:
            matched[j] = True
            correct[j] = True
    return correct


@dataclass
class RecallGrid:
    """Recall per threshold setting, with the setting coordinates.

    For VSD ``recalls[i][j]`` corresponds to ``taus[i]`` (a fraction of the
    object diameter) and ``thresholds[j]``. For MSSD/MSPD ``recalls[j]``
    corresponds to ``thresholds[j]`` (diameter fractions, resp. multiples
    of r = width / 640).
    """

    function: str
    thresholds: list
    recalls: list
    taus: list | None = None

    def shape_ok(self):
        if self.function == "vsd":
            return (
                self.taus is not None
                and len(self.recalls) == len(self.taus)
                and all(len(row) == len(self.thresholds) for row in self.recalls)
            )
        return self.taus is None and len(self.recalls) == len(self.thresholds)

    def flat(self):
        if self.function == "vsd":
            return [r for row in self.recalls for r in row]
        return list(self.recalls)


def average_recall(grid):
    """Arithmetic mean of the recall values over all settings of a grid.

    :raises ValueError: if the grid is incomplete (wrong shape, missing or
        non-finite entries, values outside [0, 1]).
    """
    if not grid.shape_ok():
        raise ValueError(f"{grid.function} recall grid has a wrong shape")
    values = grid.flat()
    if not values:
        raise ValueError("empty recall grid")
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)) or arr.min() < 0 or arr.max() > 1:
        raise ValueError("recall grid must contain values in [0, 1]")
    return float(arr.mean())


class DatasetAccumulator:
    """Accumulates per-(image, object) matching results into recall grids.

    VSD errors come as (n_est, n_gt, n_tau) tables (absolute tolerances,
    aligned with the tau fractions times the object diameter); MSSD in mm,
    MSPD in px. Thresholds for MSSD are fractions of the object diameter,
    for MSPD multiples of r = image_width / 640.
    """

    def __init__(
        self,
        tau_fractions=VSD_TAU_FRACTIONS,
        vsd_thresholds=VSD_THRESHOLDS,
        mssd_fractions=MSSD_THRESHOLD_FRACTIONS,
        mspd_factors=MSPD_THRESHOLD_FACTORS,
    ):
        for name, grid in (
            ("tau_fractions", tau_fractions),
            ("vsd_thresholds", vsd_thresholds),
            ("mssd_fractions", mssd_fractions),
            ("mspd_factors", mspd_factors),
        ):
            if len(grid) == 0:
                raise ValueError(f"{name} must be non-empty")
        self.tau_fractions = tuple(tau_fractions)
        self.vsd_thresholds = tuple(vsd_thresholds)
        self.mssd_fractions = tuple(mssd_fractions)
        self.mspd_factors = tuple(mspd_factors)
        self.vsd_correct = np.zeros(
            (len(self.tau_fractions), len(self.vsd_thresholds)), dtype=np.int64
        )
        self.mssd_correct = np.zeros(len(self.mssd_fractions), dtype=np.int64)
        self.mspd_correct = np.zeros(len(self.mspd_factors), dtype=np.int64)
        self.gt_total = 0
        self.vsd_enabled = True

    def add_group(
        self,
        scores,
        mssd_errors,
        mspd_errors,
        diameter,
        image_width,
        n_gts,
        vsd_errors=None,
    ):
        """Record one (image, object) group.

        ``scores`` are in submission file order; error tables are
        (n_est, n_gts[, n_tau]) and may be empty when no estimates exist.
        ``vsd_errors=None`` disables VSD for the whole dataset (missing
        depth).
        """
        self.gt_total += int(n_gts)
        if vsd_errors is None:
            self.vsd_enabled = False
        scores = np.asarray(scores, dtype=np.float64)
        if scores.size == 0 or n_gts == 0:
            return
        mssd_errors = np.asarray(mssd_errors, dtype=np.float64)
        mspd_errors = np.asarray(mspd_errors, dtype=np.float64)
        if self.vsd_enabled:
            vsd_errors = np.asarray(vsd_errors, dtype=np.float64)
            for ti in range(len(self.tau_fractions)):
                for hi, theta in enumerate(self.vsd_thresholds):
                    self.vsd_correct[ti, hi] += greedy_match(
                        scores, vsd_errors[:, :, ti], theta
                    ).sum()
        for hi, fraction in enumerate(self.mssd_fractions):
            self.mssd_correct[hi] += greedy_match(
                scores, mssd_errors, fraction * diameter
            ).sum()
        pixel_unit = image_width / MSPD_REFERENCE_WIDTH
        for hi, factor in enumerate(self.mspd_factors):
            self.mspd_correct[hi] += greedy_match(
                scores, mspd_errors, factor * pixel_unit
            ).sum()

    def grids(self):
        """Recall grids for the accumulated results."""
        if self.gt_total == 0:
            raise ValueError(
                "no ground-truth instances were evaluated; the recall is "
                "undefined"
            )
        total = float(self.gt_total)
        vsd_grid = None
        if self.vsd_enabled:
            vsd_grid = RecallGrid(
                "vsd",
                thresholds=list(self.vsd_thresholds),
                taus=list(self.tau_fractions),
                recalls=(self.vsd_correct / total).tolist(),
            )
        mssd_grid = RecallGrid(
            "mssd",
            thresholds=list(self.mssd_fractions),
            recalls=(self.mssd_correct / total).tolist(),
        )
        mspd_grid = RecallGrid(
            "mspd",
            thresholds=list(self.mspd_factors),
            recalls=(self.mspd_correct / total).tolist(),
        )
        return vsd_grid, mssd_grid, mspd_grid


@dataclass
class DatasetReport:
    """Scores of one dataset: per-function average recalls and grids."""

    name: str
    ar: float
    ar_vsd: float | None = None
    ar_mssd: float | None = None
    ar_mspd: float | None = None
    gt_count: int = 0
    mean_image_time: float | None = None
    vsd_grid: RecallGrid | None = None
    mssd_grid: RecallGrid | None = None
    mspd_grid: RecallGrid | None = None

    @classmethod
    def from_accumulator(cls, name, acc, mean_image_time=None):
        vsd_grid, mssd_grid, mspd_grid = acc.grids()
        ar_mssd = average_recall(mssd_grid)
        ar_mspd = average_recall(mspd_grid)
        if vsd_grid is not None:
            ar_vsd = average_recall(vsd_grid)
            ar = (ar_vsd + ar_mssd + ar_mspd) / 3.0
        else:
            ar_vsd = None
            ar = (ar_mssd + ar_mspd) / 2.0
            logger.warning(
                "dataset %s scored without VSD (missing depth images); its "
                "score averages the two remaining error functions", name
            )
        return cls(
            name=name,
            ar=ar,
            ar_vsd=ar_vsd,
            ar_mssd=ar_mssd,
            ar_mspd=ar_mspd,
            gt_count=acc.gt_total,
            mean_image_time=mean_image_time,
            vsd_grid=vsd_grid,
            mssd_grid=mssd_grid,
            mspd_grid=mspd_grid,
        )


@dataclass
class EvaluationReport:
    """Whole-run result: per-dataset reports plus the overall average."""

    datasets: list
    ar_core: float
    mean_image_time: float | None = None
    diagnostics: list = field(default_factory=list)
    schema: int = 1


def aggregate_report(datasets, diagnostics=()):
    """Combine per-dataset reports into the overall evaluation report.

    The overall score is the unweighted mean of the per-dataset scores
    (each dataset counts as a separate sub-challenge); the overall time is
    the mean of the per-dataset per-image times, where reported.
    """
    datasets = list(datasets)
    if not datasets:
        raise ValueError("at least one dataset report is required")
    ar_core = float(np.mean([d.ar for d in datasets]))
    times = [d.mean_image_time for d in datasets if d.mean_image_time is not None]
    mean_time = float(np.mean(times)) if times else None
    return EvaluationReport(
        datasets=datasets,
        ar_core=ar_core,
        mean_image_time=mean_time,
        diagnostics=list(diagnostics),
    )
