"""Evaluation engine for 6D object localization.

Given 3D object models, ground-truth pose annotations, test depth images,
and a method's pose submissions, the engine computes VSD/MSSD/MSPD pose
errors, identifies object symmetries, and produces average-recall scores
and leaderboards.
"""

from .geometry import (
    CameraIntrinsics,
    RigidTransform,
    TriangleMesh,
    compose,
    load_mesh,
    save_mesh_ply,
    transform_points,
)
from .raster import (
    depth_to_distance,
    project_points,
    render_depth_map,
    render_distance_map,
)
from .visibility import (
    est_visibility_mask_extended,
    gt_visibility_mask,
    visibility_mask,
    visible_fraction,
)
from .symmetry import (
    ContinuousSymmetry,
    SymmetrySet,
    build_symmetry_set,
    discretize_continuous,
    filter_by_texture,
    find_continuous_symmetries,
    find_discrete_symmetries,
    hausdorff,
    symmetry_epsilon,
)
from .pose_error import add, adi, mspd, mssd, vsd
from .scoring import (
    DatasetReport,
    EvaluationReport,
    GroundTruthInstance,
    PoseEstimate,
    RecallGrid,
    aggregate_report,
    average_recall,
    greedy_match,
    select_top_n,
)
from .dataset_io import (
    EvalConfig,
    ObjectAnnotation,
    read_models_info,
    read_report,
    read_scene_gt,
    read_submission,
    read_targets,
    write_models_info,
    write_report,
    write_submission,
)
from .pipeline import evaluate_dataset, evaluate_submissions
from .errors import (
    DatasetFormatError,
    InputError,
    MeshFormatError,
    PosevalError,
    SubmissionFormatError,
    VertexBehindCamera,
)

__version__ = "0.1.0"
