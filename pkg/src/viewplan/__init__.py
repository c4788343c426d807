"""Occlusion-aware viewpoint planning.

A desk-scale active-vision stack: analytic raycast RGB-D simulation of
occluded targets, scripted and teleoperated demonstration collection, an
action-chunking policy trained by behavior cloning with a CVAE objective,
a temporally ensembled closed-loop controller, and a classical
information-gain next-best-view baseline for comparison.
"""

from .camera import CameraIntrinsics
from .controller import (
    EnsembleBuffer,
    EpisodeParams,
    EpisodeResult,
    ensemble_action,
    evaluate,
    run_episode,
)
from .dataset import (
    DatasetStats,
    Demonstration,
    DemoStep,
    TrainingSample,
    compute_stats,
    iterate_samples,
    load_demo,
    save_demo,
    smooth_commands,
)
from .expert import ExpertConfig, demonstrate, select_goal
from .nbv import (
    BaselineParams,
    CandidateView,
    VoxelMap,
    integrate_depth,
    plan_next_view,
    run_baseline_episode,
    score_candidate,
)
from .policy import ActPolicy, Checkpoint, ModelConfig, infer_chunk, load_checkpoint, train
from .render import Observation, observe, render
from .scene import Scene, generate_scene, load_scene, sample_initial_viewpoints, save_scene
from .se3 import Pose, PoseDelta, Trajectory, compose, delta_between, interpolate, pose_distance
from .visibility import VisibilityReport, is_success, visibility

__version__ = "0.1.0"
