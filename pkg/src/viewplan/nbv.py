"""Search-based next-best-view baseline over a voxel occupancy map.

The planner maintains a 32^3 unknown/free/occupied grid over the workspace,
updated by exact 3-D grid traversal of every depth-image ray (free strictly
before the hit, occupied at the hit voxel, free to the boundary for no-hit
rays).  Candidate shell viewpoints are scored by casting rays through the
map only (never the ground-truth scene) and counting distinct unknown
region-of-interest voxels reachable before the first occupied voxel; the
camera jumps open-loop to the argmax each step.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .camera import CameraIntrinsics
from .controller import EpisodeParams, EpisodeResult
from .render import observe
from .scene import Scene, viewpoint_lattice
from .se3 import Pose, pose_distance, quat_angle
from .visibility import visibility

UNKNOWN, FREE, OCCUPIED = 0, 1, 2

_TIE_BREAK_W_ROT = 0.3


class VoxelMap:
    """Axis-aligned voxel grid with monotone unknown -> free -> occupied states."""

    def __init__(self, lo, hi, resolution: int, roi_center, roi_radius: float, shell):
        self.lo = np.asarray(lo, dtype=np.float64)
        self.hi = np.asarray(hi, dtype=np.float64)
        self.resolution = int(resolution)
        self.cell = (self.hi - self.lo) / self.resolution
        self.states = np.zeros(self.resolution**3, dtype=np.uint8)
        self.roi_center = np.asarray(roi_center, dtype=np.float64)
        self.roi_radius = float(roi_radius)
        self.shell = (float(shell[0]), float(shell[1]))
        centers = (np.arange(self.resolution) + 0.5)
        gx, gy, gz = np.meshgrid(centers, centers, centers, indexing="ij")
        pts = self.lo + np.stack([gx, gy, gz], axis=-1).reshape(-1, 3) * self.cell
        self.roi_mask = np.linalg.norm(pts - self.roi_center, axis=1) <= self.roi_radius

    @classmethod
    def for_scene(cls, scene: Scene, resolution: int = 32, roi_scale: float = 1.5) -> "VoxelMap":
        return cls(
            scene.workspace_lo,
            scene.workspace_hi,
            resolution,
            scene.target_center,
            roi_scale * scene.target_radius,
            (scene.shell_r_min, scene.shell_r_max),
        )

    def n_unknown(self) -> int:
        return int(np.count_nonzero(self.states == UNKNOWN))

    def voxel_index(self, point) -> tuple:
        idx = np.floor((np.asarray(point) - self.lo) / self.cell).astype(np.int64)
        return tuple(np.clip(idx, 0, self.resolution - 1))

    def state_at(self, ijk) -> int:
        i, j, k = ijk
        r = self.resolution
        return int(self.states[(i * r + j) * r + k])


def ray_directions(camera: Pose, intrinsics: CameraIntrinsics):
    """World unit directions (N, 3) and camera-z components (N,), row-major."""
    h, w = intrinsics.height, intrinsics.width
    u = (np.arange(w) + 0.5 - intrinsics.cx) / intrinsics.fx
    v = (np.arange(h) + 0.5 - intrinsics.cy) / intrinsics.fy
    uu, vv = np.meshgrid(u, v)
    d_cam = np.stack([uu, vv, np.ones_like(uu)], axis=-1).reshape(-1, 3)
    d_cam = d_cam / np.linalg.norm(d_cam, axis=1, keepdims=True)
    dirs = d_cam @ camera.rotation_matrix().T
    return dirs, d_cam[:, 2].copy()


def _dda_start(vmap: VoxelMap, origin: np.ndarray, dirs: np.ndarray):
    n = dirs.shape[0]
    r = vmap.resolution
    rel = (origin - vmap.lo) / vmap.cell
    start_idx = np.clip(np.floor(rel).astype(np.int64), 0, r - 1)
    idx = np.tile(start_idx, (n, 1))
    step = np.where(dirs > 0, 1, -1).astype(np.int64)
    with np.errstate(divide="ignore", invalid="ignore"):
        boundary = vmap.lo + (idx + (step > 0)) * vmap.cell
        t_max = np.where(dirs != 0, (boundary - origin) / dirs, np.inf)
        t_delta = np.where(dirs != 0, np.abs(vmap.cell / dirs), np.inf)
    return idx, step, t_max, t_delta


def _linear(idx: np.ndarray, r: int) -> np.ndarray:
    # rays already outside the grid are masked by callers; clamp so their
    # stale indices still produce a gatherable value
    c = np.clip(idx, 0, r - 1)
    return (c[:, 0] * r + c[:, 1]) * r + c[:, 2]


def integrate_depth(
    vmap: VoxelMap, camera: Pose, depth: np.ndarray, intrinsics: CameraIntrinsics
) -> VoxelMap:
    """Carve the map with one depth image (0.0 means no hit on that ray)."""
    if np.any(camera.position < vmap.lo) or np.any(camera.position > vmap.hi):
        raise ValueError("camera must be inside the mapped workspace")
    dirs, dcz = ray_directions(camera, intrinsics)
    flat = np.asarray(depth, dtype=np.float64).reshape(-1)
    with np.errstate(divide="ignore"):
        t_hit = np.where(flat > 0.0, flat / dcz, np.inf)

    r = vmap.resolution
    idx, step, t_max, t_delta = _dda_start(vmap, camera.position, dirs)
    active = np.ones(dirs.shape[0], dtype=bool)
    states = vmap.states
    for _ in range(3 * r + 2):
        if not active.any():
            break
        exit_t = t_max.min(axis=1)
        lin = _linear(idx, r)
        hit_here = active & (exit_t >= t_hit)
        if hit_here.any():
            states[lin[hit_here]] = OCCUPIED
            active = active & ~hit_here
        free_here = active  # exits this voxel strictly before the hit
        if free_here.any():
            lf = lin[free_here]
            sel = states[lf] == UNKNOWN
            states[lf[sel]] = FREE
        axis = t_max.argmin(axis=1)
        rows = np.arange(idx.shape[0])
        idx[rows[active], axis[active]] += step[rows[active], axis[active]]
        t_max[rows[active], axis[active]] += t_delta[rows[active], axis[active]]
        inside = (idx >= 0).all(axis=1) & (idx < r).all(axis=1)
        active = active & inside
    return vmap


def score_candidate(vmap: VoxelMap, pose: Pose, intrinsics: CameraIntrinsics) -> int:
    """Distinct unknown ROI voxels visible before any occupied voxel.

    Rays are cast through the current map only; the true scene is never
    consulted.
    """
    dirs, _ = ray_directions(pose, intrinsics)
    return int(_score_rays(vmap, pose.position, dirs))


def _score_rays(vmap: VoxelMap, origin, dirs) -> int:
    if np.any(origin < vmap.lo) or np.any(origin > vmap.hi):
        raise ValueError("candidate viewpoint must be inside the mapped workspace")
    r = vmap.resolution
    idx, step, t_max, t_delta = _dda_start(vmap, np.asarray(origin, dtype=np.float64), dirs)
    active = np.ones(dirs.shape[0], dtype=bool)
    states = vmap.states
    seen: list = []
    for _ in range(3 * r + 2):
        if not active.any():
            break
        lin = _linear(idx, r)
        st = states[lin]
        blocked = active & (st == OCCUPIED)
        active = active & ~blocked
        countable = active & (st == UNKNOWN) & vmap.roi_mask[lin]
        if countable.any():
            seen.append(lin[countable])
        axis = t_max.argmin(axis=1)
        rows = np.arange(idx.shape[0])
        idx[rows[active], axis[active]] += step[rows[active], axis[active]]
        t_max[rows[active], axis[active]] += t_delta[rows[active], axis[active]]
        inside = (idx >= 0).all(axis=1) & (idx < r).all(axis=1)
        active = active & inside
    if not seen:
        return 0
    return int(np.unique(np.concatenate(seen)).size)


@dataclass(frozen=True)
class CandidateView:
    pose: Pose
    utility: int


def plan_next_view(
    vmap: VoxelMap,
    current: Pose,
    n_samples: int = 32,
    seed: int = 0,
    intrinsics: CameraIntrinsics | None = None,
) -> CandidateView:
    """Argmax-utility candidate; ties prefer smaller motion, then lower index."""
    if n_samples < 1:
        raise ValueError("need at least one candidate")
    intr = intrinsics if intrinsics is not None else CameraIntrinsics.default()
    candidates = viewpoint_lattice(
        vmap.roi_center, n_samples, seed, vmap.shell[0], vmap.shell[1]
    )
    best = None
    best_u = -1
    best_d = math.inf
    for pose in candidates:
        u = score_candidate(vmap, pose, intr)
        d = pose_distance(current, pose, _TIE_BREAK_W_ROT)
        if u > best_u or (u == best_u and d < best_d):
            best, best_u, best_d = pose, u, d
    return CandidateView(pose=best, utility=best_u)


@dataclass(frozen=True)
class BaselineParams:
    n_samples: int = 32
    resolution: int = 32
    roi_scale: float = 1.5
    seed: int = 0


def run_baseline_episode(
    scene: Scene,
    start: Pose,
    params: EpisodeParams = EpisodeParams(),
    baseline: BaselineParams = BaselineParams(),
    intrinsics: CameraIntrinsics | None = None,
) -> EpisodeResult:
    """Observe, integrate, plan, jump; same success detector as the policy."""
    intr = intrinsics if intrinsics is not None else CameraIntrinsics.default()
    t_start = time.perf_counter()
    vmap = VoxelMap.for_scene(scene, baseline.resolution, baseline.roi_scale)
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
    if not ok:
        for t in range(params.max_steps):
            obs = observe(scene, cur, prev, intr)
            t_decide = time.perf_counter()
            integrate_depth(vmap, cur, obs.depth, intr)
            cand = plan_next_view(vmap, cur, baseline.n_samples, baseline.seed, intr)
            latencies.append(time.perf_counter() - t_decide)

            prev = cur
            path_len += float(np.linalg.norm(cand.pose.position - cur.position))
            rot_total += quat_angle(cur.quat, cand.pose.quat)
            cur = cand.pose
            steps_used = t + 1
            if not scene.in_bounds(cur.position):
                failure_reason = "out_of_bounds"
                break
            ok, rep = succeeded(cur)
            if ok:
                success = True
                break
    else:
        success = True

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
