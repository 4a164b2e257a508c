"""Networks: edge-feature cloud encoder, folding decoder, classifier head.

The encoder follows the dynamic-graph convolution recipe: at every layer
the k nearest neighbors are recomputed in the current feature space,
each edge is transformed from the concatenation [point, neighbor-point]
and max-reduced over neighbors.  A global max-pool plus a linear
projection yields the latent code.  The decoder folds a square 2-D grid
through two MLP stages conditioned on the latent into an N x 6 cloud
(positions and colors jointly).  All modules accept (points, channels)
or batched (batch, points, channels) input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch
from torch import nn

from .seeding import rng

_CDIST_MODE = "donot_use_mm_for_euclid_dist"


@dataclass(frozen=True)
class EncoderConfig:
    k_neighbors: int = 8
    layer_widths: tuple = (64, 128)
    latent_dim: int = 128
    in_channels: int = 6
    normalize: bool = False

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")
        if self.latent_dim < 1:
            raise ValueError("latent_dim must be >= 1")
        if not self.layer_widths or any(w < 1 for w in self.layer_widths):
            raise ValueError("layer widths must be positive")
        object.__setattr__(self, "layer_widths", tuple(int(w) for w in self.layer_widths))


@dataclass(frozen=True)
class DecoderConfig:
    output_points: int
    grid_side: Optional[int] = None
    fold_widths: tuple = (64, 64)
    output_channels: int = 6

    def __post_init__(self):
        if self.output_channels != 6:
            raise ValueError("repainted clouds always have 6 channels")
        if self.output_points < 1:
            raise ValueError("output_points must be >= 1")
        side = self.grid_side if self.grid_side is not None else grid_side_for(self.output_points)
        if side * side < self.output_points:
            raise ValueError(
                f"grid {side}x{side} cannot cover {self.output_points} points"
            )
        object.__setattr__(self, "grid_side", side)
        object.__setattr__(self, "fold_widths", tuple(int(w) for w in self.fold_widths))


def grid_side_for(n: int) -> int:
    """Smallest m with m*m >= n."""
    return int(math.ceil(math.sqrt(n)))


def paper_profile(output_points: int):
    """Configs at the published scale: latent 1024, doubled layer widths."""
    enc = EncoderConfig(
        k_neighbors=20,
        layer_widths=(128, 128, 256, 512),
        latent_dim=1024,
        normalize=True,
    )
    dec = DecoderConfig(output_points=output_points, fold_widths=(1024, 1024))
    return enc, dec


def knn_graph(points: torch.Tensor, k: int) -> torch.Tensor:
    """Indices of each point's k nearest other points.

    Euclidean distances in the given feature space; self is excluded;
    ties go to the smaller index.  Accepts (n, d) or (B, n, d); returns
    (n, k) or (B, n, k).
    """
    single = points.ndim == 2
    x = points[None] if single else points
    n = x.shape[1]
    if n < 2:
        raise ValueError("need at least 2 points")
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must be in [1, {n - 1}], got {k}")
    d = torch.cdist(x, x, compute_mode=_CDIST_MODE)
    eye = torch.eye(n, dtype=torch.bool, device=x.device)
    d = d.masked_fill(eye, float("inf"))
    # exact k smallest with lowest-index tie-break, without sorting whole
    # rows: strictly-closer points are always in, the remaining slots go
    # to the earliest points tied at the k-th distance
    vk = d.kthvalue(k, dim=-1, keepdim=True).values
    lt = d < vk
    eq = d == vk
    need = k - lt.sum(dim=-1, keepdim=True)
    select = lt | (eq & (eq.cumsum(dim=-1) <= need))
    idx = select.nonzero(as_tuple=False)[:, -1].reshape(d.shape[0], n, k)
    order = torch.argsort(d.gather(-1, idx), dim=-1, stable=True)
    idx = idx.gather(-1, order)
    return idx[0] if single else idx


def _gather_neighbors(x: torch.Tensor, idx: torch.Tensor) -> torch.Tensor:
    """(B, n, d) + (B, n, k) -> (B, n, k, d)."""
    B, n, d = x.shape
    k = idx.shape[-1]
    flat = idx.reshape(B, n * k, 1).expand(B, n * k, d)
    return torch.gather(x, 1, flat).reshape(B, n, k, d)


def _edge_layer(layer: nn.Linear, x: torch.Tensor, idx: torch.Tensor) -> torch.Tensor:
    """Apply a Linear(2d -> w) over edge features [point, neighbor - point].

    The weight splits into a per-point half and a per-edge half, so the
    point term is computed once per point instead of once per edge.
    """
    d = x.shape[-1]
    w_point, w_diff = layer.weight[:, :d], layer.weight[:, d:]
    diff = _gather_neighbors(x, idx) - x[:, :, None, :]
    edges = x @ w_point.T + layer.bias
    return edges[:, :, None, :] + diff @ w_diff.T


def _feature_norm(x: torch.Tensor) -> torch.Tensor:
    # per-point standardization over channels; no learned parameters so
    # results do not depend on batch composition
    mean = x.mean(dim=-1, keepdim=True)
    std = x.std(dim=-1, keepdim=True, unbiased=False)
    return (x - mean) / (std + 1e-5)


class CloudEncoder(nn.Module):
    """Point cloud -> latent vector."""

    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.cfg = cfg
        widths = cfg.layer_widths
        layers = []
        in_dim = cfg.in_channels
        for w in widths:
            layers.append(nn.Linear(2 * in_dim, w))
            in_dim = w
        self.edge_layers = nn.ModuleList(layers)
        self.project = nn.Linear(in_dim, cfg.latent_dim)

    def forward(self, points: torch.Tensor) -> torch.Tensor:
        single = points.ndim == 2
        x = points[None] if single else points
        if x.shape[-1] != self.cfg.in_channels:
            raise ValueError(
                f"expected {self.cfg.in_channels} channels, got {x.shape[-1]}"
            )
        if x.shape[1] < self.cfg.k_neighbors + 1:
            raise ValueError(
                f"need more than {self.cfg.k_neighbors} points, got {x.shape[1]}"
            )
        for layer in self.edge_layers:
            idx = knn_graph(x, self.cfg.k_neighbors)
            x = torch.relu(_edge_layer(layer, x, idx))
            x = x.max(dim=2).values
            if self.cfg.normalize:
                x = _feature_norm(x)
        latent = self.project(x.max(dim=1).values)
        return latent[0] if single else latent


class FoldingDecoder(nn.Module):
    """Latent vector -> N x 6 repainted cloud."""

    def __init__(self, cfg: DecoderConfig, latent_dim: int):
        super().__init__()
        self.cfg = cfg
        self.latent_dim = latent_dim
        m = cfg.grid_side
        steps = torch.linspace(-0.5, 0.5, m)
        gy, gx = torch.meshgrid(steps, steps, indexing="ij")
        self.register_buffer("grid", torch.stack([gx.ravel(), gy.ravel()], dim=1))
        self.fold1 = self._mlp(latent_dim + 2, cfg.fold_widths, cfg.output_channels)
        self.fold2 = self._mlp(
            latent_dim + cfg.output_channels, cfg.fold_widths, cfg.output_channels
        )

    @staticmethod
    def _mlp(in_dim, widths, out_dim):
        layers = []
        for w in widths:
            layers += [nn.Linear(in_dim, w), nn.ReLU()]
            in_dim = w
        layers.append(nn.Linear(in_dim, out_dim))
        return nn.Sequential(*layers)

    def forward(self, latent: torch.Tensor) -> torch.Tensor:
        single = latent.ndim == 1
        z = latent[None] if single else latent
        if z.shape[-1] != self.latent_dim:
            raise ValueError(f"expected latent of length {self.latent_dim}, got {z.shape[-1]}")
        B = z.shape[0]
        g = self.grid[None].expand(B, -1, -1)
        zz = z[:, None, :].expand(B, g.shape[1], -1)
        mid = self.fold1(torch.cat([zz, g], dim=-1))
        out = self.fold2(torch.cat([zz, mid], dim=-1))
        out = out[:, : self.cfg.output_points, :]
        return out[0] if single else out


class ClassifierHead(nn.Module):
    """3-layer linear probe head: latent -> latent/2 -> latent/4 -> C."""

    def __init__(self, latent_dim: int, class_count: int):
        super().__init__()
        if class_count < 2:
            raise ValueError("need at least 2 classes")
        h1 = max(latent_dim // 2, 2)
        h2 = max(latent_dim // 4, 2)
        self.net = nn.Sequential(
            nn.Linear(latent_dim, h1),
            nn.ReLU(),
            nn.Linear(h1, h2),
            nn.ReLU(),
            nn.Linear(h2, class_count),
        )

    def forward(self, latent: torch.Tensor) -> torch.Tensor:
        return self.net(latent)


def init_model(module: nn.Module, seed: int) -> nn.Module:
    """Deterministically initialize every parameter of ``module``.

    Weights are uniform in +-1/sqrt(fan_in), biases zero.  Draws come
    from a per-parameter stream named by the parameter, so adding a
    layer does not shift the others.
    """
    with torch.no_grad():
        for name, p in sorted(module.named_parameters(), key=lambda kv: kv[0]):
            if p.ndim >= 2:
                fan_in = p.shape[1]
                bound = 1.0 / math.sqrt(fan_in)
                draw = rng(seed, "init", name).uniform(-bound, bound, size=tuple(p.shape))
                p.copy_(torch.from_numpy(draw).to(p.dtype))
            else:
                p.zero_()
    return module
