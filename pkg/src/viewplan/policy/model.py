"""Action-chunking policy network with a CVAE training objective.

Training: a transformer style encoder reads the previous-step pose delta and
the target action chunk and emits a latent ``z`` (reparameterized Gaussian).
A CNN backbone turns the RGB-D frame into feature tokens; a transformer
encoder fuses [image tokens, pose-delta token, z token] into a memory that a
transformer decoder queries with k fixed sinusoidal embeddings, one per
chunk position; a small MLP head maps each query to a 6-DoF action.

Inference drops the style encoder and decodes with z = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn


@dataclass(frozen=True)
class ModelConfig:
    chunk_size: int = 5
    hidden_dim: int = 128
    n_heads: int = 4
    n_encoder_layers: int = 2
    n_decoder_layers: int = 2
    latent_dim: int = 16
    backbone_channels: tuple = (16, 32, 64, 64)
    image_size: tuple = (64, 64)
    ffn_dim: int = 256
    dropout: float = 0.1
    depth_max: float = 1.0  # meters mapped onto [0, 1] in the depth channel

    def __post_init__(self):
        object.__setattr__(self, "backbone_channels", tuple(self.backbone_channels))
        object.__setattr__(self, "image_size", tuple(self.image_size))
        if self.chunk_size < 1:
            raise ValueError("chunk size must be >= 1")
        if self.hidden_dim % self.n_heads != 0:
            raise ValueError("hidden_dim must be divisible by n_heads")
        if self.hidden_dim % 4 != 0:
            raise ValueError("hidden_dim must be divisible by 4 (2-D position codes)")
        h, w = self.image_size
        down = 2 ** len(self.backbone_channels)
        if h % down != 0 or w % down != 0:
            raise ValueError("image size must be divisible by the backbone downsampling")

    def to_dict(self) -> dict:
        return {
            "chunk_size": self.chunk_size,
            "hidden_dim": self.hidden_dim,
            "n_heads": self.n_heads,
            "n_encoder_layers": self.n_encoder_layers,
            "n_decoder_layers": self.n_decoder_layers,
            "latent_dim": self.latent_dim,
            "backbone_channels": list(self.backbone_channels),
            "image_size": list(self.image_size),
            "ffn_dim": self.ffn_dim,
            "dropout": self.dropout,
            "depth_max": self.depth_max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**{**d, "backbone_channels": tuple(d["backbone_channels"]), "image_size": tuple(d["image_size"])})


def sinusoid_1d(n: int, dim: int) -> torch.Tensor:
    """(n, dim) fixed sinusoidal position codes."""
    pos = torch.arange(n, dtype=torch.float64)[:, None]
    i = torch.arange(dim // 2, dtype=torch.float64)[None, :]
    ang = pos / torch.pow(10000.0, 2.0 * i / dim)
    return torch.cat([torch.sin(ang), torch.cos(ang)], dim=1).float()


def sinusoid_2d(h: int, w: int, dim: int) -> torch.Tensor:
    """(h*w, dim) codes: first half encodes the row, second half the column."""
    dy = sinusoid_1d(h, dim // 2)
    dx = sinusoid_1d(w, dim // 2)
    grid = torch.cat(
        [dy[:, None, :].expand(h, w, dim // 2), dx[None, :, :].expand(h, w, dim // 2)], dim=2
    )
    return grid.reshape(h * w, dim)


class ImageBackbone(nn.Module):
    """Strided CNN: one stride-2 stage per channel entry, then 1x1 to tokens."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        layers = []
        c_in = 4
        for c_out in cfg.backbone_channels:
            layers += [
                nn.Conv2d(c_in, c_out, kernel_size=3, stride=2, padding=1),
                nn.GroupNorm(1, c_out),
                nn.ReLU(inplace=True),
            ]
            c_in = c_out
        self.stages = nn.Sequential(*layers)
        self.proj = nn.Conv2d(c_in, cfg.hidden_dim, kernel_size=1)
        down = 2 ** len(cfg.backbone_channels)
        self.feat_h = cfg.image_size[0] // down
        self.feat_w = cfg.image_size[1] // down
        self.register_buffer(
            "pos", sinusoid_2d(self.feat_h, self.feat_w, cfg.hidden_dim), persistent=False
        )

    def features(self, image: torch.Tensor) -> torch.Tensor:
        """(B, 4, H, W) -> (B, S, d) content tokens, no position codes."""
        f = self.proj(self.stages(image))
        return f.flatten(2).transpose(1, 2)

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        """(B, 4, H, W) -> (B, S, d) tokens with 2-D position codes added."""
        tokens = self.features(image)
        return tokens + self.pos.to(tokens.dtype)


class StyleEncoder(nn.Module):
    """Transformer over [CLS, pose delta, action chunk] -> latent Gaussian."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        d = cfg.hidden_dim
        self.cls = nn.Parameter(torch.zeros(d))
        self.delta_proj = nn.Linear(6, d)
        self.action_proj = nn.Linear(6, d)
        layer = nn.TransformerEncoderLayer(
            d_model=d,
            nhead=cfg.n_heads,
            dim_feedforward=cfg.ffn_dim,
            dropout=cfg.dropout,
            batch_first=True,
        )
        self.encoder = nn.TransformerEncoder(layer, cfg.n_encoder_layers, enable_nested_tensor=False)
        self.head = nn.Linear(d, 2 * cfg.latent_dim)
        self.register_buffer("pos", sinusoid_1d(cfg.chunk_size + 2, d), persistent=False)
        self.latent_dim = cfg.latent_dim

    def forward(self, pose_delta, action_chunk, chunk_mask):
        """Returns (mean, log_var); masked chunk positions are excluded keys."""
        b = pose_delta.shape[0]
        tokens = torch.cat(
            [
                self.cls.to(pose_delta.dtype).expand(b, 1, -1),
                self.delta_proj(pose_delta)[:, None, :],
                self.action_proj(action_chunk),
            ],
            dim=1,
        )
        tokens = tokens + self.pos.to(tokens.dtype)
        pad = torch.cat(
            [torch.zeros(b, 2, dtype=torch.bool, device=tokens.device), ~chunk_mask], dim=1
        )
        out = self.encoder(tokens, src_key_padding_mask=pad)
        mean, log_var = self.head(out[:, 0]).chunk(2, dim=-1)
        return mean, log_var


class ChunkDecoder(nn.Module):
    """Encoder over [image tokens, delta token, z token]; decoder over k queries."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        d = cfg.hidden_dim
        self.backbone = ImageBackbone(cfg)
        self.delta_proj = nn.Linear(6, d)
        self.z_proj = nn.Linear(cfg.latent_dim, d)
        self.delta_pos = nn.Parameter(torch.zeros(d))
        self.z_pos = nn.Parameter(torch.zeros(d))
        enc_layer = nn.TransformerEncoderLayer(
            d_model=d,
            nhead=cfg.n_heads,
            dim_feedforward=cfg.ffn_dim,
            dropout=cfg.dropout,
            batch_first=True,
        )
        self.encoder = nn.TransformerEncoder(enc_layer, cfg.n_encoder_layers, enable_nested_tensor=False)
        dec_layer = nn.TransformerDecoderLayer(
            d_model=d,
            nhead=cfg.n_heads,
            dim_feedforward=cfg.ffn_dim,
            dropout=cfg.dropout,
            batch_first=True,
        )
        self.decoder = nn.TransformerDecoder(dec_layer, cfg.n_decoder_layers)
        self.register_buffer("queries", sinusoid_1d(cfg.chunk_size, d), persistent=False)
        self.head = nn.Sequential(nn.Linear(d, d), nn.ReLU(inplace=True), nn.Linear(d, 6))

    def forward(self, image, pose_delta, z):
        tokens = self.backbone(image)
        extra = torch.stack(
            [
                self.delta_proj(pose_delta) + self.delta_pos.to(pose_delta.dtype),
                self.z_proj(z) + self.z_pos.to(z.dtype),
            ],
            dim=1,
        )
        memory = self.encoder(torch.cat([tokens, extra], dim=1))
        queries = self.queries.to(memory.dtype).expand(memory.shape[0], -1, -1)
        out = self.decoder(queries, memory)
        return self.head(out)


class ActPolicy(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.style = StyleEncoder(cfg)
        self.decoder = ChunkDecoder(cfg)

    def encode_style(self, pose_delta, action_chunk, chunk_mask, eps=None):
        """Latent sample plus its Gaussian parameters (training path)."""
        mean, log_var = self.style(pose_delta, action_chunk, chunk_mask)
        if eps is None:
            eps = torch.randn_like(mean)
        z = mean + torch.exp(0.5 * log_var) * eps
        return z, mean, log_var

    def decode_chunk(self, image, pose_delta, z):
        return self.decoder(image, pose_delta, z)

    def forward(self, image, pose_delta, action_chunk, chunk_mask, eps=None):
        z, mean, log_var = self.encode_style(pose_delta, action_chunk, chunk_mask, eps)
        pred = self.decode_chunk(image, pose_delta, z)
        return pred, mean, log_var

    def decode_zero_style(self, image, pose_delta):
        """Inference path: z fixed to the zero vector."""
        z = torch.zeros(
            image.shape[0], self.cfg.latent_dim, dtype=image.dtype, device=image.device
        )
        return self.decode_chunk(image, pose_delta, z)


def chunk_loss(pred, target, chunk_mask, mean, log_var, beta: float):
    """(total, reconstruction, kl) for one batch.

    Reconstruction is the mean absolute error over unmasked (step, dim)
    entries; the divergence term sums over latent dimensions and averages
    over the batch; total = reconstruction + beta * kl.
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    m = chunk_mask.to(pred.dtype)[..., None]
    denom = m.sum() * pred.shape[-1]
    if denom.item() == 0:
        raise ValueError("all chunk entries are masked")
    rec = (torch.abs(pred - target) * m).sum() / denom
    kl = (-0.5 * (1.0 + log_var - mean * mean - torch.exp(log_var))).sum(dim=1).mean()
    total = rec + beta * kl
    return total, rec, kl


def policy_input_from_observation(obs, stats, cfg: ModelConfig):
    """Observation -> (image (4,H,W) float32, normalized delta (6,) float32)."""
    rgb = np.asarray(obs.rgb, dtype=np.float32)
    if rgb.shape[:2] != cfg.image_size:
        raise ValueError(
            f"observation is {rgb.shape[:2]}, model expects {cfg.image_size}"
        )
    depth = np.clip(np.asarray(obs.depth, dtype=np.float32), 0.0, cfg.depth_max) / cfg.depth_max
    image = np.concatenate([np.moveaxis(rgb, 2, 0), depth[None]], axis=0)
    from ..dataset import normalize_delta

    delta = normalize_delta(obs.pose_delta.to_array(), stats).astype(np.float32)
    if not (np.all(np.isfinite(image)) and np.all(np.isfinite(delta))):
        raise ValueError("non-finite policy input")
    return image, delta
