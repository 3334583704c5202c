"""Scene-agnostic visual relocalization toolkit.

Implements the non-learned pipeline around a relative-pose regressor:
reference retrieval with a spacing window, hierarchical (extensive +
guided) correlation feature matching with its auxiliary triplet loss,
inverse relative-pose targets with scale and uncertainty, and RANSAC-based
two-ray triangulation of the absolute query pose, validated on synthetic
scenes via a noise-model oracle regressor.
"""

from .camera import Intrinsics, default_intrinsics
from .correlation import (
    CorrelationLayout,
    CorrelationMap,
    FeatureMap,
    MatchMap,
    PixelMatchCounts,
    auxiliary_loss,
    auxiliary_loss_total,
    dot_counter,
    extensive_correlation,
    guided_correlation,
    match_map,
    pixel_match_counts,
    soft_match_map,
)
from .geometry import (
    Pose,
    PoseLossTerms,
    Quaternion,
    RelativePoseEstimate,
    average_rotation,
    camera_center,
    compose,
    ground_truth_targets,
    invert,
    pose_loss,
    relative_pose,
    rotation_angle,
)
from .pipeline import EvalReport, PipelineConfig, evaluate, localize, sweep_references
from .retrieval import SceneDB, SceneEntry, retrieve_references, tiny_image_descriptor
from .scene_sim import (
    NoiseModel,
    PairConstraints,
    SyntheticScene,
    corner_poses,
    make_scene,
    oracle_regressor,
    overlap_factor,
    render_depth,
    render_features,
    sample_poses,
    sample_training_pairs,
)
from .triangulate import (
    Hypothesis,
    RansacParams,
    Ray,
    aggregate_mc_samples,
    is_inlier,
    make_hypothesis,
    ransac_absolute_pose,
    ray_from_estimate,
    triangulate_rays,
)

__version__ = "0.1.0"
