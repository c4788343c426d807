"""Closed-loop rollout with temporal ensembling of overlapping action chunks.

Every step the policy predicts a k-step chunk; the buffer keeps the last k
chunks and fuses their predictions for the current step with exponentially
decaying weights, ``w_i proportional to exp(-m * i)`` where i = 0 is the
newest chunk.  During warm-up fewer than k chunks exist and the weights are
renormalized over the predictions actually present.  Fusion happens in the
normalized action space (small-angle regime enforced by the per-step clips)
and is denormalized once.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .camera import CameraIntrinsics
from .dataset import denormalize_actions
from .policy.train import Checkpoint, infer_chunk_normalized
from .render import observe
from .scene import Scene
from .se3 import Pose, PoseDelta, compose, pack_pose
from .visibility import visibility

DEFAULT_DECAY = 0.01
CLIP_TRANSLATION = 0.05  # meters per step
CLIP_ROTATION = 0.2  # radians per step


class EnsembleBuffer:
    """Ring of the last k chunks, each stamped with its issue timestep."""

    def __init__(self, k: int, m: float = DEFAULT_DECAY):
        if k < 1:
            raise ValueError("chunk size must be >= 1")
        if m < 0:
            raise ValueError("decay must be >= 0")
        self.k = k
        self.m = m
        self._chunks: list = []  # (issue_step, (k, 6) normalized array)

    def push(self, chunk: np.ndarray, issue_step: int) -> None:
        chunk = np.asarray(chunk, dtype=np.float64)
        if chunk.shape != (self.k, 6):
            raise ValueError(f"chunk must be ({self.k}, 6), got {chunk.shape}")
        self._chunks.append((issue_step, chunk))
        if len(self._chunks) > self.k:
            self._chunks.pop(0)

    def predictions_for(self, t: int):
        """(ages, rows): per-chunk age i = t - issue and its row for step t."""
        ages, rows = [], []
        for issue, chunk in reversed(self._chunks):  # newest first
            i = t - issue
            if 0 <= i <= self.k - 1:
                ages.append(i)
                rows.append(chunk[i])
        return np.asarray(ages), np.asarray(rows)


def ensemble_weights(ages: np.ndarray, m: float) -> np.ndarray:
    w = np.exp(-m * np.asarray(ages, dtype=np.float64))
    return w / w.sum()


def ensemble_action(buffer: EnsembleBuffer, t: int, stats) -> PoseDelta:
    """Convex fusion of every available prediction for step t, denormalized."""
    ages, rows = buffer.predictions_for(t)
    if len(ages) == 0:
        raise RuntimeError(f"no chunk in the buffer covers step {t}")
    w = ensemble_weights(ages, buffer.m)
    fused = w @ rows
    return PoseDelta.from_array(denormalize_actions(fused, stats))


def clip_delta(
    d: PoseDelta,
    max_translation: float = CLIP_TRANSLATION,
    max_rotation: float = CLIP_ROTATION,
) -> PoseDelta:
    return PoseDelta(
        np.clip(d.translation, -max_translation, max_translation),
        np.clip(d.rotation, -max_rotation, max_rotation),
    )


@dataclass(frozen=True)
class EpisodeParams:
    max_steps: int = 50
    tau_v: float = 0.95
    rate_hz: float = 10.0
    simulated_time: bool = True  # pacing bypassed, latencies still recorded
    clip_translation: float = CLIP_TRANSLATION
    clip_rotation: float = CLIP_ROTATION


@dataclass
class EpisodeResult:
    scene_id: str
    initial_pose: Pose
    success: bool
    steps_used: int
    wall_clock_s: float
    decision_latencies_s: list
    final_visibility: float
    path_length_m: float
    rotation_total_rad: float
    failure_reason: str | None = None

    def to_dict(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "initial_pose": [float(x) for x in pack_pose(self.initial_pose)],
            "success": self.success,
            "steps_used": self.steps_used,
            "wall_clock_s": self.wall_clock_s,
            "decision_latencies_s": self.decision_latencies_s,
            "final_visibility": self.final_visibility,
            "path_length_m": self.path_length_m,
            "rotation_total_rad": self.rotation_total_rad,
            "failure_reason": self.failure_reason,
        }


def run_episode(
    scene: Scene,
    start: Pose,
    checkpoint: Checkpoint,
    params: EpisodeParams = EpisodeParams(),
    intrinsics: CameraIntrinsics | None = None,
) -> EpisodeResult:
    """Observe, infer a chunk, ensemble, clip, move; stop on success or cap."""
    intr = intrinsics if intrinsics is not None else CameraIntrinsics.default(
        checkpoint.config.image_size[1], checkpoint.config.image_size[0]
    )
    t_start = time.perf_counter()
    buffer = EnsembleBuffer(checkpoint.config.chunk_size, DEFAULT_DECAY)
    cur = start
    prev = start
    latencies: list = []
    path_len = 0.0
    rot_total = 0.0
    success = False
    failure_reason = None
    steps_used = 0

    def succeeded(pose):
        rep = visibility(scene, pose, intr)
        return rep.visibility_fraction >= params.tau_v and rep.in_frame, rep

    ok, rep = succeeded(cur)
    if ok:
        return EpisodeResult(
            scene_id=scene.scene_id,
            initial_pose=start,
            success=True,
            steps_used=0,
            wall_clock_s=time.perf_counter() - t_start,
            decision_latencies_s=[],
            final_visibility=rep.visibility_fraction,
            path_length_m=0.0,
            rotation_total_rad=0.0,
        )

    for t in range(params.max_steps):
        step_t0 = time.perf_counter()
        obs = observe(scene, cur, prev, intr)
        t_decide = time.perf_counter()
        chunk = infer_chunk_normalized(checkpoint, obs)
        buffer.push(chunk, t)
        action = ensemble_action(buffer, t, checkpoint.stats)
        latencies.append(time.perf_counter() - t_decide)
        action = clip_delta(action, params.clip_translation, params.clip_rotation)

        prev = cur
        cur = compose(cur, action)
        steps_used = t + 1
        path_len += float(np.linalg.norm(action.translation))
        rot_total += action.rotation_angle()

        if not scene.in_bounds(cur.position):
            failure_reason = "out_of_bounds"
            break
        ok, rep = succeeded(cur)
        if ok:
            success = True
            break
        if not params.simulated_time:
            elapsed = time.perf_counter() - step_t0
            time.sleep(max(0.0, 1.0 / params.rate_hz - elapsed))

    final_rep = visibility(scene, cur, intr)
    return EpisodeResult(
        scene_id=scene.scene_id,
        initial_pose=start,
        success=success,
        steps_used=steps_used,
        wall_clock_s=time.perf_counter() - t_start,
        decision_latencies_s=latencies,
        final_visibility=final_rep.visibility_fraction,
        path_length_m=path_len,
        rotation_total_rad=rot_total,
        failure_reason=failure_reason,
    )


def aggregate_results(results) -> dict:
    results = list(results)
    n = len(results)
    successes = [r for r in results if r.success]
    all_latencies = [x for r in results for x in r.decision_latencies_s]
    steps = sorted(r.steps_used for r in successes)
    return {
        "n_episodes": n,
        "n_success": len(successes),
        "success_rate": round(100.0 * len(successes) / n, 1) if n else None,
        "mean_steps": float(np.mean(steps)) if steps else None,
        "median_steps": float(np.median(steps)) if steps else None,
        "mean_latency_s": float(np.mean(all_latencies)) if all_latencies else None,
        "mean_path_m": float(np.mean([r.path_length_m for r in results])) if n else None,
    }


def evaluate(
    pairs,
    checkpoint: Checkpoint,
    params: EpisodeParams = EpisodeParams(),
    intrinsics: CameraIntrinsics | None = None,
    planner: str = "act",
    episode_fn=None,
) -> dict:
    """Run one episode per (scene, start) pair and aggregate the report."""
    if episode_fn is None:
        episode_fn = lambda scene, start: run_episode(scene, start, checkpoint, params, intrinsics)
    results = [episode_fn(scene, start) for scene, start in pairs]
    if not results:
        raise ValueError("no evaluation episodes")
    return {
        "planner": planner,
        "params": {
            "max_steps": params.max_steps,
            "tau_v": params.tau_v,
            "rate_hz": params.rate_hz,
            "simulated_time": params.simulated_time,
            "clip_translation": params.clip_translation,
            "clip_rotation": params.clip_rotation,
        },
        "per_episode": [r.to_dict() for r in results],
        "aggregate": aggregate_results(results),
    }
