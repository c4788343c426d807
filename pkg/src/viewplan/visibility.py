"""Ground-truth target visibility and the episode success criterion.

The occluder-free render gives the target silhouette; the full render gives
the pixels where the target is actually the first hit.  A viewpoint is a
success when the visible fraction reaches the threshold and the silhouette
sits fully inside the image interior at a minimum apparent size (25 pixels
at 64x64, scaled linearly with image area), which rules out "success" by
retreating until the target is subpixel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import CameraIntrinsics
from .render import render
from .scene import Scene
from .se3 import Pose

_MIN_SILHOUETTE_AT_64 = 25


def min_silhouette_pixels(intrinsics: CameraIntrinsics) -> int:
    area = intrinsics.width * intrinsics.height
    return max(1, round(_MIN_SILHOUETTE_AT_64 * area / 4096.0))


@dataclass(frozen=True)
class VisibilityReport:
    silhouette_pixels: int
    visible_pixels: int
    in_frame: bool
    visibility_fraction: float


def visibility(scene: Scene, camera: Pose, intrinsics: CameraIntrinsics) -> VisibilityReport:
    _, _, free_ids = render(scene, camera, intrinsics, occluders_enabled=False)
    _, _, full_ids = render(scene, camera, intrinsics, occluders_enabled=True)
    sil = free_ids == 1
    silhouette_pixels = int(np.count_nonzero(sil))
    visible_pixels = int(np.count_nonzero(full_ids == 1))
    border = np.zeros_like(sil)
    border[0, :] = True
    border[-1, :] = True
    border[:, 0] = True
    border[:, -1] = True
    in_frame = (
        silhouette_pixels >= min_silhouette_pixels(intrinsics)
        and not bool(np.any(sil & border))
    )
    fraction = 0.0 if silhouette_pixels == 0 else visible_pixels / silhouette_pixels
    return VisibilityReport(
        silhouette_pixels=silhouette_pixels,
        visible_pixels=visible_pixels,
        in_frame=in_frame,
        visibility_fraction=fraction,
    )


def is_success(
    scene: Scene, camera: Pose, intrinsics: CameraIntrinsics, tau_v: float = 0.95
) -> bool:
    """True iff the target is at least tau_v visible and fully in frame."""
    if not (0.0 < tau_v <= 1.0):
        raise ValueError("tau_v must lie in (0, 1]")
    report = visibility(scene, camera, intrinsics)
    return report.visibility_fraction >= tau_v and report.in_frame
