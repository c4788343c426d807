"""Closed-loop control with temporal ensembling.

Each step the policy predicts a 5-action chunk; the controller fuses every
live chunk's prediction for the current step with exponentially decaying
weights (newest first), clips the result to per-step bounds, and moves the
camera, stopping at the first unobstructed in-frame view of the target.

Reuses the checkpoint from demo 04 if present, else trains a quick one.
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from viewplan import CameraIntrinsics, EpisodeParams, generate_scene, run_episode, sample_initial_viewpoints
from viewplan.controller import ensemble_weights
from viewplan.policy.train import load_checkpoint

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)
CKPT = os.path.join(OUT, "04_ckpt")

print("ensemble weights for 5 live chunks (m=0.01):",
      ensemble_weights(np.arange(5), 0.01).round(6))

if not os.path.isdir(CKPT):
    print("no checkpoint from demo 04; run demos/04_train_policy.py first")
    raise SystemExit(0)

ckpt = load_checkpoint(CKPT)
intr = CameraIntrinsics.default()
scene = generate_scene(seed=3000, difficulty="medium")  # the training scene
start = sample_initial_viewpoints(scene, 3, seed=77)[0]

res = run_episode(scene, start, ckpt, EpisodeParams(max_steps=50))
print(f"\nrollout: success={res.success} in {res.steps_used} steps, "
      f"final visibility {res.final_visibility:.2f}, "
      f"path {res.path_length_m*100:.1f} cm, "
      f"mean decision latency {np.mean(res.decision_latencies_s)*1000:.1f} ms")

fig, ax = plt.subplots(figsize=(6, 3.5))
ax.plot(res.decision_latencies_s, ".-")
ax.set_xlabel("step"), ax.set_ylabel("decision latency (s)")
ax.set_title("per-step inference + ensembling cost")
fig.tight_layout()
fig.savefig(os.path.join(OUT, "05_latency.png"), dpi=110)
print(f"wrote {OUT}/05_latency.png")
