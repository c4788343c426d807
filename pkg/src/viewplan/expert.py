"""Geometry-aware demonstration oracle.

Picks the nearest shell viewpoint that sees the target unobstructed, then
eases toward it along the straight SE(3) path with a cosine velocity profile
(small steps near both endpoints, largest mid-trajectory), optionally adds
zero-mean jitter to the intermediate poses with exact endpoints, smooths the
command stream, and renders one observation per step.  The final step holds
the zero action at the goal viewpoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .camera import CameraIntrinsics
from .dataset import DemoStep, Demonstration, smooth_commands
from .render import observe
from .scene import Scene, goal_candidates, stable_hash
from .se3 import (
    Pose,
    PoseDelta,
    Trajectory,
    compose,
    delta_between,
    interpolate,
    pose_distance,
    quantize_pose,
)
from .visibility import is_success


class GoalSelectionError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExpertConfig:
    n_goal_candidates: int = 256
    steps: int = 30
    w_rot: float = 0.3  # meters per radian in the goal-distance metric
    noise_std: float = 0.0
    tau_v: float = 0.95

    def __post_init__(self):
        if not (2 <= self.steps <= 50):
            raise ValueError("steps must lie in [2, 50]")
        if self.n_goal_candidates < 16:
            raise ValueError("need at least 16 goal candidates")


def select_goal(
    scene: Scene, start: Pose, cfg: ExpertConfig, intrinsics: CameraIntrinsics
) -> Pose:
    """Nearest succeeding candidate on the scene's fixed goal lattice.

    Ties break toward the lower candidate index.
    """
    best = None
    best_dist = math.inf
    for cand in goal_candidates(scene, cfg.n_goal_candidates):
        if not is_success(scene, cand, intrinsics, cfg.tau_v):
            continue
        d = pose_distance(start, cand, cfg.w_rot)
        if d < best_dist:
            best = cand
            best_dist = d
    if best is None:
        raise GoalSelectionError(
            f"scene certification violated: no succeeding viewpoint among "
            f"{cfg.n_goal_candidates} candidates of {scene.scene_id}"
        )
    return best


def cosine_profile(n_poses: int) -> np.ndarray:
    """Monotone path fractions with cosine-eased spacing, f[0]=0, f[-1]=1."""
    j = np.arange(n_poses, dtype=np.float64)
    return (1.0 - np.cos(math.pi * j / (n_poses - 1))) / 2.0


def demonstrate(
    scene: Scene,
    start: Pose,
    cfg: ExpertConfig,
    intrinsics: CameraIntrinsics,
    seed: int = 0,
    demo_id: str | None = None,
) -> Demonstration:
    """One expert demonstration from start to a certified goal viewpoint."""
    goal = select_goal(scene, start, cfg, intrinsics)
    rng = np.random.default_rng([seed, stable_hash(scene.scene_id)])

    if pose_distance(start, goal, cfg.w_rot) < 1e-9:
        raw_poses = [start, goal]
    else:
        fractions = cosine_profile(cfg.steps)
        raw_poses = [interpolate(start, goal, float(s)) for s in fractions]
        if cfg.noise_std > 0.0:
            for i in range(1, len(raw_poses) - 1):
                jitter = PoseDelta(
                    rng.normal(0.0, cfg.noise_std, size=3),
                    rng.normal(0.0, cfg.noise_std, size=3),
                )
                raw_poses[i] = compose(raw_poses[i], jitter)

    smoothed, _ = smooth_commands(Trajectory(tuple(raw_poses)))
    # wire precision before rendering, so stored frames replay bit-exactly
    poses = [quantize_pose(p) for p in smoothed.poses]
    deltas = [delta_between(poses[i], poses[i + 1]) for i in range(len(poses) - 1)]
    actions = deltas + [PoseDelta.zero()]

    steps = []
    for i, pose in enumerate(poses):
        prev = poses[i - 1] if i > 0 else pose
        obs = observe(scene, pose, prev, intrinsics)
        steps.append(DemoStep(observation=obs, action=actions[i]))

    if demo_id is None:
        demo_id = f"{scene.scene_id}-s{seed:04d}"
    return Demonstration(
        demo_id=demo_id,
        scene_id=scene.scene_id,
        source="scripted",
        steps=tuple(steps),
        camera_trajectory=Trajectory(tuple(poses)),
        intrinsics=intrinsics,
    )
