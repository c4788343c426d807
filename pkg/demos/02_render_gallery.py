"""Scene generation and raycast RGB-D rendering.

Scenes are procedural: one red target sphere plus green leaf-like occluders
(discs and flattened ellipsoids) floating between the target and the
viewpoint shell.  Every generated scene is certified to be solvable but not
trivial.  The renderer casts one ray per pixel and shades analytically; the
depth channel uses 0.0 where nothing is hit.
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from viewplan import CameraIntrinsics, generate_scene, render, sample_initial_viewpoints, visibility

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

intr = CameraIntrinsics.default()  # 64x64, 60 degree horizontal FOV

fig, axes = plt.subplots(3, 6, figsize=(13, 7))
for row, difficulty in enumerate(["easy", "medium", "hard"]):
    scene = generate_scene(seed=7, difficulty=difficulty)
    poses = sample_initial_viewpoints(scene, 3, seed=1)
    for col, pose in enumerate(poses):
        rgb, depth, ids = render(scene, pose, intr)
        rep = visibility(scene, pose, intr)
        ax = axes[row, 2 * col]
        ax.imshow(rgb)
        ax.set_title(f"{difficulty}: vis {rep.visibility_fraction:.2f}", fontsize=8)
        ax.axis("off")
        axd = axes[row, 2 * col + 1]
        axd.imshow(np.where(depth > 0, depth, np.nan), cmap="viridis")
        axd.set_title("depth (m)", fontsize=8)
        axd.axis("off")

fig.suptitle("RGB and depth from three viewpoints per difficulty")
fig.tight_layout()
fig.savefig(os.path.join(OUT, "02_gallery.png"), dpi=110)
print(f"wrote {OUT}/02_gallery.png")

scene = generate_scene(seed=7, difficulty="medium")
print(f"\nscene {scene.scene_id}: target r={scene.target_radius:.3f} m, "
      f"{len(scene.occluders)} occluders")
for pose in sample_initial_viewpoints(scene, 5, seed=2):
    rep = visibility(scene, pose, intr)
    print(f"  viewpoint at {np.round(pose.position, 2)}: "
          f"visibility {rep.visibility_fraction:.2f}, in frame {rep.in_frame}")
