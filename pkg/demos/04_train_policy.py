"""Training the action-chunking policy on a handful of demonstrations.

The model is a CVAE: a style encoder reads (pose delta, action chunk) and
emits a latent z during training; the decoder fuses CNN image tokens, the
pose delta and z through a transformer and predicts the next k actions.
The loss is masked mean-absolute reconstruction plus a beta-weighted
divergence (beta = 10); at inference z is the zero vector.

A shortened run for illustration; the acceptance suite does the full one.
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from viewplan import CameraIntrinsics, ExpertConfig, ModelConfig, compute_stats, demonstrate, generate_scene, sample_initial_viewpoints
from viewplan.policy.train import infer_chunk, save_checkpoint, train

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

intr = CameraIntrinsics.default()
scene = generate_scene(seed=3000, difficulty="medium")
starts = sample_initial_viewpoints(scene, 3, seed=77)
demos = [demonstrate(scene, s, ExpertConfig(steps=20), intr, seed=i) for i, s in enumerate(starts)]
stats = compute_stats(demos)
print(f"training on {stats.n_demos} demos / {stats.n_steps} steps")
print("per-axis action std (mm, mrad):", (stats.action_std * 1000).round(2))

ckpt = train(
    demos, stats, ModelConfig(), seed=0, epochs=40, lr=3e-4, batch_size=16,
    log_fn=lambda row: row["epoch"] % 10 == 0 and print(
        f"  epoch {row['epoch']:3d}  total {row['total']:.4f}  "
        f"rec {row['reconstruction']:.4f}  kl {row['kl']:.5f}"
    ),
)

fig, ax = plt.subplots(figsize=(6, 3.5))
ax.plot([m["reconstruction"] for m in ckpt.metrics], label="reconstruction")
ax.plot([m["kl"] for m in ckpt.metrics], label="divergence")
ax.set_xlabel("epoch"), ax.set_yscale("log"), ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(OUT, "04_losses.png"), dpi=110)
print(f"wrote {OUT}/04_losses.png")

save_checkpoint(ckpt, os.path.join(OUT, "04_ckpt"))
print(f"checkpoint written to {OUT}/04_ckpt")

chunk = infer_chunk(ckpt, demos[0].steps[0].observation)
print("\npredicted opening chunk (mm / mrad):")
print((chunk * 1000).round(2))
