"""Scripted expert demonstrations and the on-disk dataset format.

The expert picks the nearest shell viewpoint with an unobstructed view and
eases toward it (cosine velocity profile, optional jitter, smoothing); every
step records an RGB-D observation plus the 6-DoF action taken.  Saved demos
are self-contained directories and are rejected unless the final frame
actually satisfies the success criterion.
"""

import os
import tempfile

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from viewplan import CameraIntrinsics, ExpertConfig, demonstrate, generate_scene, sample_initial_viewpoints, save_demo, visibility
from viewplan.dataset import load_demo, load_demo_scene, verify_replay

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

intr = CameraIntrinsics.default()
scene = generate_scene(seed=21, difficulty="medium")
start = sample_initial_viewpoints(scene, 1, seed=5)[0]
demo = demonstrate(scene, start, ExpertConfig(steps=30, noise_std=0.003), intr, seed=0)
print(f"demonstration: {len(demo)} steps on {scene.scene_id}")

vis = [
    visibility(scene, p, intr).visibility_fraction
    for p in demo.camera_trajectory.poses
]
mags = [np.linalg.norm(s.action.translation) * 1000 for s in demo.steps]

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 3.5))
ax1.plot(vis, "g.-")
ax1.axhline(0.95, color="r", ls="--", label="success threshold")
ax1.set_xlabel("step"), ax1.set_ylabel("visibility fraction"), ax1.legend()
ax2.plot(mags, "b.-")
ax2.set_xlabel("step"), ax2.set_ylabel("|translation| per step (mm)")
ax2.set_title("cosine-eased command profile")
fig.tight_layout()
fig.savefig(os.path.join(OUT, "03_expert_demo.png"), dpi=110)
print(f"wrote {OUT}/03_expert_demo.png")

frames = [demo.steps[i].observation.rgb for i in range(0, len(demo), max(1, len(demo) // 6))]
fig, axes = plt.subplots(1, len(frames), figsize=(2 * len(frames), 2.2))
for ax, f in zip(axes, frames):
    ax.imshow(f)
    ax.axis("off")
fig.suptitle("what the camera saw along the demonstration")
fig.savefig(os.path.join(OUT, "03_frames.png"), dpi=110)
print(f"wrote {OUT}/03_frames.png")

with tempfile.TemporaryDirectory() as root:
    path = save_demo(demo, scene, root)
    print(f"\nsaved to {path}:")
    for name in sorted(os.listdir(path))[:8]:
        print("  ", name)
    loaded = load_demo(path)
    verify_replay(loaded, load_demo_scene(path))
    print("replay check: stored frames match a re-render of the trajectory")
