"""Procedural occluded-target scenes and viewpoint sampling.

A scene is one target sphere plus a handful of disc/ellipsoid occluders
floating between the target and the viewpoint shell on the approach side
(+x hemisphere, world +z up).  Generation is deterministic in the seed and
every emitted scene is certified: at least one shell viewpoint sees the
target unobstructed and at least 20% of a dense candidate sweep does not,
so episodes are neither impossible nor trivial.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .camera import CameraIntrinsics
from .se3 import Pose, PoseDelta, compose, look_at

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))
DIFFICULTY_OCCLUDERS = {"easy": 2, "medium": 4, "hard": 6}

# occluder shell (distance from target) and in-plane size ranges, per difficulty
_OCCLUDER_DIST = {"easy": (0.10, 0.16), "medium": (0.11, 0.20), "hard": (0.12, 0.24)}
_OCCLUDER_SIZE = {"easy": (0.06, 0.10), "medium": (0.05, 0.09), "hard": (0.04, 0.09)}

_WORKSPACE_HALF = 0.75
_SHELL_R_MIN = 0.3
_SHELL_R_MAX = 0.6
_HEMISPHERE_MIN_X = 0.1  # keeps viewpoints off the straight-down pole


class SceneGenerationError(RuntimeError):
    pass


class SceneFormatError(ValueError):
    pass


def stable_hash(s: str) -> int:
    return int.from_bytes(hashlib.sha256(s.encode()).digest()[:8], "little")


@dataclass(frozen=True)
class Occluder:
    shape: str  # "disc" | "ellipsoid"
    pose: Pose
    half_extents: np.ndarray
    color: np.ndarray

    def __post_init__(self):
        if self.shape not in ("disc", "ellipsoid"):
            raise ValueError(f"unknown occluder shape {self.shape!r}")
        object.__setattr__(self, "half_extents", np.asarray(self.half_extents, dtype=np.float64))
        object.__setattr__(self, "color", np.asarray(self.color, dtype=np.float64))


@dataclass(frozen=True)
class Scene:
    scene_id: str
    seed: int
    difficulty: str
    target_center: np.ndarray
    target_radius: float
    target_color: np.ndarray
    occluders: tuple
    background_color: np.ndarray
    workspace_lo: np.ndarray
    workspace_hi: np.ndarray
    shell_r_min: float
    shell_r_max: float

    def __post_init__(self):
        for name in ("target_center", "target_color", "background_color", "workspace_lo", "workspace_hi"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        object.__setattr__(self, "occluders", tuple(self.occluders))
        if not (0.02 <= self.target_radius <= 0.06):
            raise ValueError(f"target radius {self.target_radius} outside [0.02, 0.06] m")
        lo, hi = self.workspace_lo, self.workspace_hi
        if np.any(self.target_center - self.target_radius < lo) or np.any(
            self.target_center + self.target_radius > hi
        ):
            raise ValueError("target leaves the workspace")
        for occ in self.occluders:
            r = float(np.max(occ.half_extents))
            if np.any(occ.pose.position - r < lo) or np.any(occ.pose.position + r > hi):
                raise ValueError("occluder leaves the workspace")

    def in_bounds(self, point) -> bool:
        p = np.asarray(point, dtype=np.float64)
        return bool(np.all(p >= self.workspace_lo) and np.all(p <= self.workspace_hi))


# ---------------------------------------------------------------------------
# JSON wire format
# ---------------------------------------------------------------------------

def scene_to_dict(scene: Scene) -> dict:
    return {
        "scene_id": scene.scene_id,
        "seed": scene.seed,
        "difficulty": scene.difficulty,
        "target": {
            "center": [float(x) for x in scene.target_center],
            "radius": float(scene.target_radius),
            "color": [float(x) for x in scene.target_color],
        },
        "occluders": [
            {
                "shape": occ.shape,
                "pose": [float(x) for x in occ.pose.to_array()],
                "half_extents": [float(x) for x in occ.half_extents],
                "color": [float(x) for x in occ.color],
            }
            for occ in scene.occluders
        ],
        "background_color": [float(x) for x in scene.background_color],
        "workspace_bounds": {
            "lo": [float(x) for x in scene.workspace_lo],
            "hi": [float(x) for x in scene.workspace_hi],
        },
        "shell": {"r_min": float(scene.shell_r_min), "r_max": float(scene.shell_r_max)},
    }


def scene_from_dict(d: dict) -> Scene:
    occluders = tuple(
        Occluder(
            shape=o["shape"],
            pose=Pose.from_array(np.asarray(o["pose"], dtype=np.float64)),
            half_extents=o["half_extents"],
            color=o["color"],
        )
        for o in d["occluders"]
    )
    return Scene(
        scene_id=d["scene_id"],
        seed=int(d["seed"]),
        difficulty=d["difficulty"],
        target_center=d["target"]["center"],
        target_radius=float(d["target"]["radius"]),
        target_color=d["target"]["color"],
        occluders=occluders,
        background_color=d["background_color"],
        workspace_lo=d["workspace_bounds"]["lo"],
        workspace_hi=d["workspace_bounds"]["hi"],
        shell_r_min=float(d["shell"]["r_min"]),
        shell_r_max=float(d["shell"]["r_max"]),
    )


def save_scene(scene: Scene, path) -> None:
    with open(path, "w") as f:
        json.dump(scene_to_dict(scene), f, indent=1)
        f.write("\n")


def load_scene(path) -> Scene:
    with open(path) as f:
        try:
            return scene_from_dict(json.load(f))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise SceneFormatError(f"{path} is not a valid scene file: {e}") from e


# ---------------------------------------------------------------------------
# viewpoint lattice
# ---------------------------------------------------------------------------

def viewpoint_lattice(center, n: int, seed: int, r_min: float, r_max: float) -> list:
    """n quasi-uniform look-at poses on the +x hemisphere shell around center.

    Directions follow a Fibonacci lattice over the zone x in [0.1, 1] with a
    seed-driven azimuthal phase; radii are uniform in [r_min, r_max].
    """
    if n < 1:
        raise ValueError("need at least one viewpoint")
    if not (0.0 < r_min < r_max):
        raise ValueError("shell radii must satisfy 0 < r_min < r_max")
    center = np.asarray(center, dtype=np.float64)
    rng = np.random.default_rng(seed)
    phase = rng.uniform(0.0, 2.0 * math.pi)
    radii = rng.uniform(r_min, r_max, size=n)
    poses = []
    for i in range(n):
        x = 1.0 - (1.0 - _HEMISPHERE_MIN_X) * (i + 0.5) / n
        rho = math.sqrt(max(0.0, 1.0 - x * x))
        phi = i * GOLDEN_ANGLE + phase
        direction = np.array([x, rho * math.cos(phi), rho * math.sin(phi)])
        poses.append(look_at(center + radii[i] * direction, center))
    return poses


def sample_initial_viewpoints(scene: Scene, n: int, seed: int, shell: tuple | None = None) -> list:
    """Deterministic episode start poses on the scene's viewpoint shell."""
    r_min, r_max = shell if shell is not None else (scene.shell_r_min, scene.shell_r_max)
    return viewpoint_lattice(scene.target_center, n, seed, r_min, r_max)


def goal_candidates(scene: Scene, n: int = 256) -> list:
    """The fixed goal/certification lattice, seeded by the scene id."""
    return viewpoint_lattice(
        scene.target_center, n, stable_hash(scene.scene_id), scene.shell_r_min, scene.shell_r_max
    )


# ---------------------------------------------------------------------------
# generation + certification
# ---------------------------------------------------------------------------

def _sample_scene(rng: np.random.Generator, seed: int, difficulty: str, attempt: int) -> Scene:
    center = rng.uniform(-0.03, 0.03, size=3)
    radius = float(rng.uniform(0.03, 0.055))
    target_color = np.array(
        [rng.uniform(0.75, 0.95), rng.uniform(0.05, 0.20), rng.uniform(0.05, 0.20)]
    )
    base = rng.uniform(0.25, 0.42)
    background = np.clip(base + rng.uniform(-0.03, 0.03, size=3), 0.0, 1.0)

    d_lo, d_hi = _OCCLUDER_DIST[difficulty]
    s_lo, s_hi = _OCCLUDER_SIZE[difficulty]
    occluders = []
    for _ in range(DIFFICULTY_OCCLUDERS[difficulty]):
        while True:
            v = rng.normal(size=3)
            v[0] = abs(v[0])
            norm = float(np.linalg.norm(v))
            if norm > 1e-6 and v[0] / norm >= 0.05:
                v = v / norm
                break
        pos = center + rng.uniform(d_lo, d_hi) * v
        facing = look_at(pos, center)
        tilt = PoseDelta(np.zeros(3), rng.uniform(-0.4, 0.4, size=3))
        pose = compose(facing, tilt)
        if rng.random() < 0.6:
            shape = "disc"
            half = np.array([rng.uniform(s_lo, s_hi), rng.uniform(s_lo, s_hi), 0.0])
        else:
            shape = "ellipsoid"
            half = np.array(
                [rng.uniform(s_lo, s_hi), rng.uniform(s_lo, s_hi), rng.uniform(0.01, 0.025)]
            )
        color = np.array(
            [rng.uniform(0.05, 0.25), rng.uniform(0.35, 0.70), rng.uniform(0.05, 0.25)]
        )
        occluders.append(Occluder(shape=shape, pose=pose, half_extents=half, color=color))

    return Scene(
        scene_id=f"scn-{difficulty}-{seed}",
        seed=seed,
        difficulty=difficulty,
        target_center=center,
        target_radius=radius,
        target_color=target_color,
        occluders=tuple(occluders),
        background_color=background,
        workspace_lo=np.full(3, -_WORKSPACE_HALF),
        workspace_hi=np.full(3, _WORKSPACE_HALF),
        shell_r_min=_SHELL_R_MIN,
        shell_r_max=_SHELL_R_MAX,
    )


def certify_scene(
    scene: Scene,
    intrinsics: CameraIntrinsics | None = None,
    n_candidates: int = 256,
    tau_v: float = 0.95,
) -> tuple[bool, int, int]:
    """Sweep the goal lattice; returns (ok, n_success, n_fail).

    ok requires >= 1 succeeding candidate and >= 20% failing candidates.
    """
    from .visibility import is_success

    intr = intrinsics if intrinsics is not None else CameraIntrinsics.default()
    n_success = 0
    for pose in goal_candidates(scene, n_candidates):
        if is_success(scene, pose, intr, tau_v):
            n_success += 1
    n_fail = n_candidates - n_success
    ok = n_success >= 1 and n_fail >= math.ceil(0.2 * n_candidates)
    return ok, n_success, n_fail


def generate_scene(
    seed: int,
    difficulty: str = "medium",
    intrinsics: CameraIntrinsics | None = None,
    max_attempts: int = 100,
) -> Scene:
    """Deterministic certified scene for (seed, difficulty)."""
    if difficulty not in DIFFICULTY_OCCLUDERS:
        raise ValueError(f"difficulty must be one of {sorted(DIFFICULTY_OCCLUDERS)}")
    salt = stable_hash(difficulty)
    for attempt in range(max_attempts):
        rng = np.random.default_rng([seed, attempt, salt])
        scene = _sample_scene(rng, seed, difficulty, attempt)
        ok, _, _ = certify_scene(scene, intrinsics)
        if ok:
            return scene
    raise SceneGenerationError(
        f"no certifiable {difficulty} scene for seed {seed} after {max_attempts} attempts"
    )
