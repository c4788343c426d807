"""Analytic raycast RGB-D rendering of target/occluder scenes.

Per-pixel rays go through the pinhole model, are intersected analytically
with the target sphere and the disc/ellipsoid occluders, and the nearest
positive-t hit wins (earlier primitive wins exact ties).  Shading is
head-light Lambertian, ``max(0.2, n . -ray)``, applied to the flat primitive
color.  Depth is the hit distance along the optical axis; pixels with no hit
carry the 0.0 sentinel.  Primitive ids are 0 for background, 1 for the
target, and 2+j for occluder j.

All arithmetic is written in explicit per-component form with a fixed
operation order so the output is reproducible bit-for-bit by an independent
scalar implementation of the same formulas.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import CameraIntrinsics
from .scene import Scene
from .se3 import Pose, PoseDelta, delta_between

_INF = np.inf


@dataclass(frozen=True)
class Observation:
    """One policy observation: RGB-D image plus the previous-step pose delta."""

    rgb: np.ndarray  # (H, W, 3) in [0, 1]
    depth: np.ndarray  # (H, W) meters, 0.0 where no hit
    pose_delta: PoseDelta


def _intersect_sphere(o, dx, dy, dz, center, radius):
    ox = o[0] - center[0]
    oy = o[1] - center[1]
    oz = o[2] - center[2]
    b = ox * dx + oy * dy + oz * dz
    cc = ox * ox + oy * oy + oz * oz - radius * radius
    disc = b * b - cc
    s = np.sqrt(np.maximum(disc, 0.0))
    t1 = -b - s
    t2 = -b + s
    t = np.where(t1 > 0.0, t1, np.where(t2 > 0.0, t2, _INF))
    t = np.where(disc >= 0.0, t, _INF)
    with np.errstate(invalid="ignore"):
        nx = (o[0] + t * dx - center[0]) / radius
        ny = (o[1] + t * dy - center[1]) / radius
        nz = (o[2] + t * dz - center[2]) / radius
    return t, nx, ny, nz


def _intersect_ellipsoid(o, dx, dy, dz, rot, center, half):
    ha, hb, hc = half[0], half[1], half[2]
    rx = o[0] - center[0]
    ry = o[1] - center[1]
    rz = o[2] - center[2]
    # local = R^T (p - center), axes scaled to the unit sphere
    lox = (rot[0, 0] * rx + rot[1, 0] * ry + rot[2, 0] * rz) / ha
    loy = (rot[0, 1] * rx + rot[1, 1] * ry + rot[2, 1] * rz) / hb
    loz = (rot[0, 2] * rx + rot[1, 2] * ry + rot[2, 2] * rz) / hc
    ldx = (rot[0, 0] * dx + rot[1, 0] * dy + rot[2, 0] * dz) / ha
    ldy = (rot[0, 1] * dx + rot[1, 1] * dy + rot[2, 1] * dz) / hb
    ldz = (rot[0, 2] * dx + rot[1, 2] * dy + rot[2, 2] * dz) / hc
    a = ldx * ldx + ldy * ldy + ldz * ldz
    b = lox * ldx + loy * ldy + loz * ldz
    c = lox * lox + loy * loy + loz * loz - 1.0
    disc = b * b - a * c
    s = np.sqrt(np.maximum(disc, 0.0))
    t1 = (-b - s) / a
    t2 = (-b + s) / a
    t = np.where(t1 > 0.0, t1, np.where(t2 > 0.0, t2, _INF))
    t = np.where(disc >= 0.0, t, _INF)
    with np.errstate(invalid="ignore"):
        hlx = lox + t * ldx
        hly = loy + t * ldy
        hlz = loz + t * ldz
        gx_l = hlx / ha
        gy_l = hly / hb
        gz_l = hlz / hc
        gx = rot[0, 0] * gx_l + rot[0, 1] * gy_l + rot[0, 2] * gz_l
        gy = rot[1, 0] * gx_l + rot[1, 1] * gy_l + rot[1, 2] * gz_l
        gz = rot[2, 0] * gx_l + rot[2, 1] * gy_l + rot[2, 2] * gz_l
        gn = np.sqrt(gx * gx + gy * gy + gz * gz)
        nx = gx / gn
        ny = gy / gn
        nz = gz / gn
    return t, nx, ny, nz


def _intersect_disc(o, dx, dy, dz, rot, center, half):
    ax = rot[0, 2]
    ay = rot[1, 2]
    az = rot[2, 2]
    denom = ax * dx + ay * dy + az * dz
    num = ax * (center[0] - o[0]) + ay * (center[1] - o[1]) + az * (center[2] - o[2])
    with np.errstate(divide="ignore", invalid="ignore"):
        t_raw = num / denom
        hx = o[0] + t_raw * dx - center[0]
        hy = o[1] + t_raw * dy - center[1]
        hz = o[2] + t_raw * dz - center[2]
        lx = rot[0, 0] * hx + rot[1, 0] * hy + rot[2, 0] * hz
        ly = rot[0, 1] * hx + rot[1, 1] * hy + rot[2, 1] * hz
        ex = lx / half[0]
        ey = ly / half[1]
        q = ex * ex + ey * ey
        valid = (t_raw > 0.0) & (q <= 1.0)
    t = np.where(valid, t_raw, _INF)
    # two-sided surface: the shading normal faces the incoming ray
    nx = np.where(denom < 0.0, ax, -ax)
    ny = np.where(denom < 0.0, ay, -ay)
    nz = np.where(denom < 0.0, az, -az)
    return t, nx, ny, nz


def render(
    scene: Scene,
    camera: Pose,
    intrinsics: CameraIntrinsics,
    occluders_enabled: bool = True,
):
    """Raycast the scene; returns (rgb (H,W,3), depth (H,W), hit_ids (H,W))."""
    h, w = intrinsics.height, intrinsics.width
    u = (np.arange(w, dtype=np.float64) + 0.5 - intrinsics.cx) / intrinsics.fx
    v = (np.arange(h, dtype=np.float64) + 0.5 - intrinsics.cy) / intrinsics.fy
    uu, vv = np.meshgrid(u, v)
    norm = np.sqrt(uu * uu + vv * vv + 1.0)
    inv = 1.0 / norm
    dcx = uu * inv
    dcy = vv * inv
    dcz = inv
    rot = camera.rotation_matrix()
    dx = rot[0, 0] * dcx + rot[0, 1] * dcy + rot[0, 2] * dcz
    dy = rot[1, 0] * dcx + rot[1, 1] * dcy + rot[1, 2] * dcz
    dz = rot[2, 0] * dcx + rot[2, 1] * dcy + rot[2, 2] * dcz
    o = camera.position

    best_t = np.full((h, w), _INF)
    best_id = np.zeros((h, w), dtype=np.int32)
    best_nx = np.zeros((h, w))
    best_ny = np.zeros((h, w))
    best_nz = np.zeros((h, w))

    prims = [(1, "sphere", None, scene.target_center, None)]
    if occluders_enabled:
        for j, occ in enumerate(scene.occluders):
            prims.append((2 + j, occ.shape, occ.pose.rotation_matrix(), occ.pose.position, occ.half_extents))

    colors = np.zeros((2 + len(scene.occluders), 3))
    colors[0] = scene.background_color
    colors[1] = scene.target_color
    for j, occ in enumerate(scene.occluders):
        colors[2 + j] = occ.color

    for pid, shape, prot, center, half in prims:
        if shape == "sphere":
            t, nx, ny, nz = _intersect_sphere(o, dx, dy, dz, center, scene.target_radius)
        elif shape == "ellipsoid":
            t, nx, ny, nz = _intersect_ellipsoid(o, dx, dy, dz, prot, center, half)
        else:
            t, nx, ny, nz = _intersect_disc(o, dx, dy, dz, prot, center, half)
        win = t < best_t
        best_t = np.where(win, t, best_t)
        best_id = np.where(win, np.int32(pid), best_id)
        best_nx = np.where(win, nx, best_nx)
        best_ny = np.where(win, ny, best_ny)
        best_nz = np.where(win, nz, best_nz)

    hit = best_id > 0
    ndotd = best_nx * dx + best_ny * dy + best_nz * dz
    lam = np.maximum(0.2, -ndotd)
    rgb = colors[best_id]
    rgb = np.where(hit[..., None], rgb * lam[..., None], rgb)
    depth = np.where(hit, best_t * dcz, 0.0)
    return rgb, depth, best_id


def observe(
    scene: Scene,
    camera: Pose,
    prev_camera: Pose,
    intrinsics: CameraIntrinsics,
) -> Observation:
    """Render with occluders plus the pose delta from the previous step.

    First-step calls pass prev_camera = camera, giving the zero delta.
    """
    rgb, depth, _ = render(scene, camera, intrinsics, occluders_enabled=True)
    return Observation(rgb=rgb, depth=depth, pose_delta=delta_between(prev_camera, camera))
