"""Demonstration records, their on-disk format, and training-sample iteration.

A demonstration is a step-indexed sequence of (observation, action) pairs
plus the camera trajectory that produced it; the last step holds the zero
"stay" action at the final (successful) viewpoint.  On disk each demo is one
directory:

    manifest.json   demo_id, scene_id, source, n_steps, intrinsics, format_version
    scene.json      the full scene, so a demo replays standalone
    rgb_%04d.png    8-bit RGB frames
    depth_%04d.bin  little-endian float32, row-major H x W
    actions.bin     float32 T x 6
    deltas.bin      float32 T x 6 (per-step observation pose deltas)
    poses.bin       float32 T x 7

RGB is quantized to 8 bits on save; depth, actions, deltas and poses are
bit-exact float32.  Demos that do not end at a successful viewpoint are
rejected at save time.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .camera import CameraIntrinsics
from .render import Observation
from .scene import Scene, load_scene, save_scene
from .se3 import (
    Pose,
    PoseDelta,
    Trajectory,
    compose,
    delta_between,
    matrix_to_rpy,
    pack_delta,
    pack_pose,
    quat_angle,
    rpy_to_quat,
    unpack_delta,
    unpack_pose,
)
from .visibility import is_success

FORMAT_VERSION = 1
MAX_DEMO_STEPS = 50

CHAIN_POS_TOL = 1e-5  # meters, per step
CHAIN_ROT_TOL = 1e-5  # radians, per step


class DemoValidationError(ValueError):
    """A demonstration invariant failed; the message names it."""


@dataclass(frozen=True)
class DemoStep:
    observation: Observation
    action: PoseDelta


@dataclass(frozen=True)
class Demonstration:
    demo_id: str
    scene_id: str
    source: str  # "scripted" | "human"
    steps: tuple
    camera_trajectory: Trajectory
    intrinsics: CameraIntrinsics

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))

    def __len__(self) -> int:
        return len(self.steps)

    def actions_array(self) -> np.ndarray:
        return np.stack([s.action.to_array() for s in self.steps])

    def deltas_array(self) -> np.ndarray:
        return np.stack([s.observation.pose_delta.to_array() for s in self.steps])


@dataclass(frozen=True)
class DatasetStats:
    action_mean: np.ndarray
    action_std: np.ndarray
    delta_mean: np.ndarray
    delta_std: np.ndarray
    n_demos: int
    n_steps: int

    def to_dict(self) -> dict:
        return {
            "action_mean": [float(x) for x in self.action_mean],
            "action_std": [float(x) for x in self.action_std],
            "delta_mean": [float(x) for x in self.delta_mean],
            "delta_std": [float(x) for x in self.delta_std],
            "n_demos": self.n_demos,
            "n_steps": self.n_steps,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetStats":
        return cls(
            action_mean=np.asarray(d["action_mean"], dtype=np.float64),
            action_std=np.asarray(d["action_std"], dtype=np.float64),
            delta_mean=np.asarray(d["delta_mean"], dtype=np.float64),
            delta_std=np.asarray(d["delta_std"], dtype=np.float64),
            n_demos=int(d["n_demos"]),
            n_steps=int(d["n_steps"]),
        )


@dataclass(frozen=True)
class TrainingSample:
    observation: Observation
    action_chunk: np.ndarray  # (k, 6), normalized
    chunk_mask: np.ndarray  # (k,) bool, False where padded past episode end


# ---------------------------------------------------------------------------
# command smoothing
# ---------------------------------------------------------------------------

def smooth_commands(raw: Trajectory) -> tuple:
    """Window-3 moving average over positions and unwrapped Euler angles.

    Endpoints are preserved exactly.  Returns the smoothed trajectory and the
    consecutive deltas recomputed on it, so compose-chaining the deltas from
    the first pose reproduces the trajectory exactly.  Trajectories shorter
    than 3 poses are returned unchanged.
    """
    poses = list(raw.poses)
    n = len(poses)
    if n >= 3:
        positions = np.stack([p.position for p in poses])
        rpys = np.unwrap(
            np.asarray([matrix_to_rpy(p.rotation_matrix()) for p in poses]), axis=0
        )
        sm_pos = positions.copy()
        sm_rpy = rpys.copy()
        sm_pos[1:-1] = (positions[:-2] + positions[1:-1] + positions[2:]) / 3.0
        sm_rpy[1:-1] = (rpys[:-2] + rpys[1:-1] + rpys[2:]) / 3.0
        poses = (
            [poses[0]]
            + [Pose(sm_pos[i], rpy_to_quat(*sm_rpy[i])) for i in range(1, n - 1)]
            + [poses[-1]]
        )
    smoothed = Trajectory(tuple(poses), raw.timestamps)
    deltas = [delta_between(poses[i], poses[i + 1]) for i in range(n - 1)]
    return smoothed, deltas


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def validate_demonstration(
    demo: Demonstration, scene: Scene, tau_v: float = 0.95
) -> None:
    """Raise DemoValidationError naming the first violated invariant."""
    t = len(demo.steps)
    if not (1 <= t <= MAX_DEMO_STEPS):
        raise DemoValidationError(f"step count {t} outside [1, {MAX_DEMO_STEPS}]")
    if t != len(demo.camera_trajectory):
        raise DemoValidationError(
            f"trajectory has {len(demo.camera_trajectory)} poses for {t} steps"
        )
    first_delta = demo.steps[0].observation.pose_delta.to_array()
    if np.max(np.abs(first_delta)) > 1e-9:
        raise DemoValidationError("first observation pose delta is not zero")

    running = demo.camera_trajectory.poses[0]
    for i, step in enumerate(demo.steps):
        want = demo.camera_trajectory.poses[i]
        pos_err = float(np.max(np.abs(running.position - want.position)))
        rot_err = quat_angle(running.quat, want.quat)
        if pos_err > CHAIN_POS_TOL or rot_err > CHAIN_ROT_TOL:
            raise DemoValidationError(
                f"action chain diverges from trajectory at step {i} "
                f"(pos {pos_err:.2e} m, rot {rot_err:.2e} rad)"
            )
        if i > 0:
            obs_delta = step.observation.pose_delta.to_array()
            want_delta = delta_between(
                demo.camera_trajectory.poses[i - 1], want
            ).to_array()
            if np.max(np.abs(obs_delta - want_delta)) > 1e-5:
                raise DemoValidationError(f"observation delta mismatch at step {i}")
        running = compose(running, step.action)

    final = demo.camera_trajectory.poses[-1]
    if not is_success(scene, final, demo.intrinsics, tau_v):
        raise DemoValidationError("final pose does not satisfy the success criterion")


# ---------------------------------------------------------------------------
# save / load
# ---------------------------------------------------------------------------

def quantize_rgb(rgb: np.ndarray) -> np.ndarray:
    return np.rint(np.clip(rgb, 0.0, 1.0) * 255.0).astype(np.uint8)


def save_demo(demo: Demonstration, scene: Scene, root_dir, tau_v: float = 0.95) -> str:
    """Validate and write one demo directory; returns its path."""
    if demo.scene_id != scene.scene_id:
        raise DemoValidationError(
            f"demo references scene {demo.scene_id!r}, got {scene.scene_id!r}"
        )
    if demo.source not in ("scripted", "human"):
        raise DemoValidationError(f"unknown source {demo.source!r}")
    validate_demonstration(demo, scene, tau_v)

    path = os.path.join(root_dir, demo.demo_id)
    os.makedirs(path, exist_ok=True)
    manifest = {
        "format_version": FORMAT_VERSION,
        "demo_id": demo.demo_id,
        "scene_id": demo.scene_id,
        "source": demo.source,
        "n_steps": len(demo.steps),
        "intrinsics": demo.intrinsics.to_dict(),
    }
    with open(os.path.join(path, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=1)
        f.write("\n")
    save_scene(scene, os.path.join(path, "scene.json"))

    for i, step in enumerate(demo.steps):
        Image.fromarray(quantize_rgb(step.observation.rgb), "RGB").save(
            os.path.join(path, f"rgb_{i:04d}.png")
        )
        step.observation.depth.astype("<f4").tofile(os.path.join(path, f"depth_{i:04d}.bin"))

    np.stack([pack_delta(s.action) for s in demo.steps]).tofile(os.path.join(path, "actions.bin"))
    np.stack([pack_delta(s.observation.pose_delta) for s in demo.steps]).tofile(
        os.path.join(path, "deltas.bin")
    )
    np.stack([pack_pose(p) for p in demo.camera_trajectory.poses]).tofile(
        os.path.join(path, "poses.bin")
    )
    return path


def load_demo(path) -> Demonstration:
    with open(os.path.join(path, "manifest.json")) as f:
        manifest = json.load(f)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise DemoValidationError(
            f"unsupported demo format version {manifest.get('format_version')!r}"
        )
    n = int(manifest["n_steps"])
    intrinsics = CameraIntrinsics.from_dict(manifest["intrinsics"])
    h, w = intrinsics.height, intrinsics.width

    for i in range(n):
        for name in (f"rgb_{i:04d}.png", f"depth_{i:04d}.bin"):
            if not os.path.exists(os.path.join(path, name)):
                raise DemoValidationError(f"manifest lists {n} steps but {name} is missing")
    if os.path.exists(os.path.join(path, f"rgb_{n:04d}.png")):
        raise DemoValidationError("more frame files than manifest n_steps")

    actions = np.fromfile(os.path.join(path, "actions.bin"), dtype="<f4").reshape(n, 6)
    deltas = np.fromfile(os.path.join(path, "deltas.bin"), dtype="<f4").reshape(n, 6)
    poses_raw = np.fromfile(os.path.join(path, "poses.bin"), dtype="<f4").reshape(n, 7)

    steps = []
    poses = []
    for i in range(n):
        rgb = np.asarray(Image.open(os.path.join(path, f"rgb_{i:04d}.png"))).astype(np.float64) / 255.0
        depth = (
            np.fromfile(os.path.join(path, f"depth_{i:04d}.bin"), dtype="<f4")
            .reshape(h, w)
            .astype(np.float64)
        )
        obs = Observation(rgb=rgb, depth=depth, pose_delta=unpack_delta(deltas[i]))
        steps.append(DemoStep(observation=obs, action=unpack_delta(actions[i])))
        poses.append(unpack_pose(poses_raw[i]))

    return Demonstration(
        demo_id=manifest["demo_id"],
        scene_id=manifest["scene_id"],
        source=manifest["source"],
        steps=tuple(steps),
        camera_trajectory=Trajectory(tuple(poses)),
        intrinsics=intrinsics,
    )


def load_demo_scene(path) -> Scene:
    return load_scene(os.path.join(path, "scene.json"))


def list_demo_dirs(root_dir) -> list:
    out = []
    for name in sorted(os.listdir(root_dir)):
        p = os.path.join(root_dir, name)
        if os.path.isdir(p) and os.path.exists(os.path.join(p, "manifest.json")):
            out.append(p)
    return out


def verify_replay(demo: Demonstration, scene: Scene) -> None:
    """Re-render along the stored trajectory and compare against stored frames.

    Stored RGB must match within the 8-bit quantization bound (1/255 + 1e-6
    per channel) and depth within 1e-6 m; failure means the scene and the
    trajectory drifted apart.
    """
    from .render import render

    for i, (pose, step) in enumerate(zip(demo.camera_trajectory.poses, demo.steps)):
        rgb, depth, _ = render(scene, pose, demo.intrinsics, occluders_enabled=True)
        rgb_err = float(np.max(np.abs(rgb - step.observation.rgb)))
        if rgb_err > 1.0 / 255.0 + 1e-6:
            raise DemoValidationError(f"replay rgb drift {rgb_err:.3e} at step {i}")
        depth_err = float(np.max(np.abs(depth - step.observation.depth)))
        if depth_err > 1e-6:
            raise DemoValidationError(f"replay depth drift {depth_err:.3e} at step {i}")


# ---------------------------------------------------------------------------
# statistics and sample iteration
# ---------------------------------------------------------------------------

_STD_FLOOR = 1e-6


def compute_stats(demos) -> DatasetStats:
    demos = list(demos)
    if not demos:
        raise ValueError("cannot compute statistics over zero demos")
    actions = np.concatenate([d.actions_array() for d in demos])
    deltas = np.concatenate([d.deltas_array() for d in demos])
    return DatasetStats(
        action_mean=actions.mean(axis=0),
        action_std=np.maximum(actions.std(axis=0), _STD_FLOOR),
        delta_mean=deltas.mean(axis=0),
        delta_std=np.maximum(deltas.std(axis=0), _STD_FLOOR),
        n_demos=len(demos),
        n_steps=int(sum(len(d) for d in demos)),
    )


def save_stats(stats: DatasetStats, root_dir) -> str:
    path = os.path.join(root_dir, "stats.json")
    with open(path, "w") as f:
        json.dump(stats.to_dict(), f, indent=1)
        f.write("\n")
    return path


def load_stats(root_dir) -> DatasetStats:
    with open(os.path.join(root_dir, "stats.json")) as f:
        return DatasetStats.from_dict(json.load(f))


def normalize_actions(a: np.ndarray, stats: DatasetStats) -> np.ndarray:
    return (np.asarray(a, dtype=np.float64) - stats.action_mean) / stats.action_std


def denormalize_actions(a: np.ndarray, stats: DatasetStats) -> np.ndarray:
    return np.asarray(a, dtype=np.float64) * stats.action_std + stats.action_mean


def normalize_delta(d: np.ndarray, stats: DatasetStats) -> np.ndarray:
    return (np.asarray(d, dtype=np.float64) - stats.delta_mean) / stats.delta_std


def iterate_samples(demos, k: int, stats: DatasetStats, seed: int):
    """One epoch of training samples: every timestep of every demo exactly once.

    Chunks are normalized; positions past the episode end repeat the
    normalized zero action with mask False.  Order is a deterministic
    shuffle of all (demo, t) pairs by the seed.
    """
    if k < 1:
        raise ValueError("chunk size must be >= 1")
    demos = list(demos)
    index = [(i, t) for i, d in enumerate(demos) for t in range(len(d))]
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(index))
    pad_row = normalize_actions(np.zeros(6), stats)
    actions = [normalize_actions(d.actions_array(), stats) for d in demos]
    for j in order:
        di, t = index[j]
        demo = demos[di]
        n = len(demo)
        real = min(k, n - t)
        chunk = np.empty((k, 6))
        chunk[:real] = actions[di][t : t + real]
        chunk[real:] = pad_row
        mask = np.zeros(k, dtype=bool)
        mask[:real] = True
        yield TrainingSample(
            observation=demo.steps[t].observation, action_chunk=chunk, chunk_mask=mask
        )
