"""Training loop, checkpointing, and chunk inference for the action policy.

Checkpoints are directories: ``model.pt`` holds the parameter blob (weights,
optimizer state, RNG state) and ``checkpoint.json`` is the portable sidecar
(model config, dataset statistics, step count, per-epoch metrics, training
hyperparameters).  The best-by-reconstruction epoch is retained under
``best/`` alongside the latest state.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
import torch

from ..dataset import DatasetStats, denormalize_actions, normalize_actions
from .model import ActPolicy, ModelConfig, chunk_loss, policy_input_from_observation

DEFAULT_BETA = 10.0
DEFAULT_LR = 1e-4
DEFAULT_BATCH = 16


@dataclass
class Checkpoint:
    model: ActPolicy
    config: ModelConfig
    stats: DatasetStats
    step_count: int
    metrics: list
    hparams: dict


def save_checkpoint(ckpt: Checkpoint, out_dir, rng_state=None, optimizer=None) -> str:
    os.makedirs(out_dir, exist_ok=True)
    blob = {"model": ckpt.model.state_dict()}
    if rng_state is not None:
        blob["rng_state"] = rng_state
    if optimizer is not None:
        blob["optimizer"] = optimizer.state_dict()
    torch.save(blob, os.path.join(out_dir, "model.pt"))
    sidecar = {
        "model_config": ckpt.config.to_dict(),
        "dataset_stats": ckpt.stats.to_dict(),
        "step_count": ckpt.step_count,
        "metrics": ckpt.metrics,
        "hparams": ckpt.hparams,
    }
    with open(os.path.join(out_dir, "checkpoint.json"), "w") as f:
        json.dump(sidecar, f, indent=1)
        f.write("\n")
    return str(out_dir)


def load_checkpoint(path) -> Checkpoint:
    with open(os.path.join(path, "checkpoint.json")) as f:
        sidecar = json.load(f)
    config = ModelConfig.from_dict(sidecar["model_config"])
    stats = DatasetStats.from_dict(sidecar["dataset_stats"])
    model = ActPolicy(config)
    blob = torch.load(os.path.join(path, "model.pt"), weights_only=False)
    model.load_state_dict(blob["model"])
    model.eval()
    return Checkpoint(
        model=model,
        config=config,
        stats=stats,
        step_count=int(sidecar["step_count"]),
        metrics=sidecar["metrics"],
        hparams=sidecar["hparams"],
    )


def _load_resume_extras(path):
    blob = torch.load(os.path.join(path, "model.pt"), weights_only=False)
    return blob.get("rng_state"), blob.get("optimizer")


def _param_norm_snapshot(model) -> dict:
    return {
        name: float(p.detach().norm())
        for name, p in list(model.named_parameters())[:8]
    }


def train(
    demos,
    stats: DatasetStats,
    config: ModelConfig,
    seed: int,
    epochs: int,
    lr: float = DEFAULT_LR,
    batch_size: int = DEFAULT_BATCH,
    out_dir=None,
    beta: float = DEFAULT_BETA,
    resume=None,
    log_fn=None,
) -> Checkpoint:
    """Adam training over every (demo, t) sample once per epoch.

    Deterministic given the seed: single-worker data order, seeded latent
    noise and dropout.  Raises on a non-finite loss with the failing batch
    index and a parameter-norm snapshot.
    """
    demos = list(demos)
    if not demos:
        raise ValueError("no demonstrations to train on")
    torch.manual_seed(seed)

    k = config.chunk_size
    images, deltas_n, actions_n = [], [], []
    for d in demos:
        img_t, del_t = zip(
            *(policy_input_from_observation(s.observation, stats, config) for s in d.steps)
        )
        images.append(torch.from_numpy(np.stack(img_t)))
        deltas_n.append(torch.from_numpy(np.stack(del_t)))
        actions_n.append(
            torch.from_numpy(normalize_actions(d.actions_array(), stats).astype(np.float32))
        )
    index = [(di, t) for di, d in enumerate(demos) for t in range(len(d))]
    pad_row = torch.from_numpy(normalize_actions(np.zeros(6), stats).astype(np.float32))

    step_count = 0
    metrics: list = []
    model = ActPolicy(config)
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    if resume is not None:
        prev = load_checkpoint(resume)
        if prev.config != config:
            raise ValueError("resume checkpoint was trained with a different model config")
        model.load_state_dict(prev.model.state_dict())
        step_count = prev.step_count
        metrics = list(prev.metrics)
        rng_state, opt_state = _load_resume_extras(resume)
        if rng_state is not None:
            torch.set_rng_state(rng_state)
        if opt_state is not None:
            optimizer.load_state_dict(opt_state)
    model.train()

    hparams = {
        "lr": lr,
        "batch_size": batch_size,
        "epochs": epochs,
        "seed": seed,
        "beta": beta,
    }
    best_rec = min((m["reconstruction"] for m in metrics), default=float("inf"))
    start_epoch = len(metrics)

    def build_batch(ids):
        img = torch.stack([images[di][t] for di, t in ids])
        dlt = torch.stack([deltas_n[di][t] for di, t in ids])
        chunks, masks = [], []
        for di, t in ids:
            n = actions_n[di].shape[0]
            real = min(k, n - t)
            chunk = pad_row.repeat(k, 1)
            chunk[:real] = actions_n[di][t : t + real]
            mask = torch.zeros(k, dtype=torch.bool)
            mask[:real] = True
            chunks.append(chunk)
            masks.append(mask)
        return img, dlt, torch.stack(chunks), torch.stack(masks)

    ckpt = Checkpoint(
        model=model, config=config, stats=stats, step_count=step_count,
        metrics=metrics, hparams=hparams,
    )
    for epoch in range(start_epoch, start_epoch + epochs):
        order = np.random.default_rng([seed, epoch]).permutation(len(index))
        sums = np.zeros(3)
        seen = 0
        for bi, lo in enumerate(range(0, len(order), batch_size)):
            ids = [index[j] for j in order[lo : lo + batch_size]]
            img, dlt, chunk, mask = build_batch(ids)
            pred, mean, log_var = model(img, dlt, chunk, mask)
            total, rec, kl = chunk_loss(pred, chunk, mask, mean, log_var, beta)
            if not torch.isfinite(total):
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch} batch {bi}; "
                    f"parameter norms: {_param_norm_snapshot(model)}"
                )
            optimizer.zero_grad()
            total.backward()
            optimizer.step()
            step_count += 1
            b = len(ids)
            sums += b * np.array([total.item(), rec.item(), kl.item()])
            seen += b
        row = {
            "epoch": epoch,
            "total": sums[0] / seen,
            "reconstruction": sums[1] / seen,
            "kl": sums[2] / seen,
        }
        metrics.append(row)
        if log_fn is not None:
            log_fn(row)
        ckpt.step_count = step_count
        if out_dir is not None:
            save_checkpoint(ckpt, out_dir, rng_state=torch.get_rng_state(), optimizer=optimizer)
            if row["reconstruction"] < best_rec:
                save_checkpoint(ckpt, os.path.join(out_dir, "best"))
        best_rec = min(best_rec, row["reconstruction"])

    model.eval()
    return ckpt


def infer_chunk_normalized(ckpt: Checkpoint, observation) -> np.ndarray:
    """(k, 6) chunk in normalized action space, deterministic (z = 0)."""
    model = ckpt.model
    model.eval()
    image, delta = policy_input_from_observation(observation, ckpt.stats, ckpt.config)
    with torch.no_grad():
        pred = model.decode_zero_style(
            torch.from_numpy(image)[None], torch.from_numpy(delta)[None]
        )
    return pred[0].numpy().astype(np.float64)


def infer_chunk(ckpt: Checkpoint, observation) -> np.ndarray:
    """(k, 6) chunk in physical units (meters / radians)."""
    return denormalize_actions(infer_chunk_normalized(ckpt, observation), ckpt.stats)
