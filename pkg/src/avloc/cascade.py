"""Visually guided audio disentanglement and soft localization."""
from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

COS_EPS = 1e-8


class Disentangle(nn.Module):
    """Two 1x1 convs (2c -> c -> c) with a leaky ReLU in between.

    output="bn_relu" follows fc2 with BatchNorm and ReLU, so the result lives
    in the same non-negative, batch-normalized range as the bottleneck it
    replaces; "linear" returns fc2's output as is.
    """

    def __init__(self, channels: int, negative_slope: float = 0.2, output: str = "bn_relu"):
        super().__init__()
        if output not in ("linear", "bn", "relu", "bn_relu"):
            raise ValueError(f"unknown disentangle output {output!r}")
        self.channels = channels
        self.fc1 = nn.Conv2d(2 * channels, channels, 1)
        self.fc2 = nn.Conv2d(channels, channels, 1)
        self.negative_slope = negative_slope
        self.output = output
        self.norm = nn.BatchNorm2d(channels) if "bn" in output else None

    def forward(self, a: torch.Tensor, g_v: torch.Tensor) -> torch.Tensor:
        x = self.fc2(F.leaky_relu(self.fc1(tile_concat(a, g_v)), self.negative_slope))
        if self.norm is not None:
            x = self.norm(x)
        return F.relu(x) if "relu" in self.output else x


def tile_concat(a: torch.Tensor, g_v: torch.Tensor) -> torch.Tensor:
    """Concat[a, Tile(g_v)] along channels: (N, c, h, w), (N, c) -> (N, 2c, h, w)."""
    if a.dim() != 4 or g_v.dim() != 2 or a.shape[:2] != g_v.shape:
        raise ValueError(f"channel mismatch: a {tuple(a.shape)}, g_v {tuple(g_v.shape)}")
    tiled = g_v[:, :, None, None].expand(-1, -1, *a.shape[-2:])
    return torch.cat([a, tiled], dim=1)


def dis_loss(m_pred: torch.Tensor, m_gt: torch.Tensor) -> torch.Tensor:
    """Squared l2 distance between masks, averaged over elements."""
    if m_pred.shape != m_gt.shape:
        raise ValueError(f"mask shape mismatch: {tuple(m_pred.shape)} vs {tuple(m_gt.shape)}")
    return ((m_pred - m_gt) ** 2).mean()


def av_attention(v: torch.Tensor, g_a: torch.Tensor) -> torch.Tensor:
    """Cosine similarity of every visual cell with the audio vector.

    v: (..., c, h, w), g_a: (..., c) with matching leading dims (or broadcastable
    after inserting grid axes) -> (..., h, w).
    """
    if v.shape[-3] != g_a.shape[-1]:
        raise ValueError(f"channel mismatch: v has {v.shape[-3]}, g_a has {g_a.shape[-1]}")
    g = g_a[..., :, None, None]
    dot = (v * g).sum(dim=-3)
    nv = v.pow(2).sum(dim=-3).sqrt()
    ng = g.pow(2).sum(dim=-3).sqrt()
    return dot / (nv * ng + COS_EPS)


def spatial_softmax(s: torch.Tensor) -> torch.Tensor:
    """Softmax jointly over the last two (spatial) axes."""
    flat = s.flatten(-2)
    return torch.softmax(flat, dim=-1).view_as(s)


def soft_localize(v: torch.Tensor, s: torch.Tensor) -> torch.Tensor:
    """Scale each cell's channel vector by its spatial-softmax weight."""
    if v.shape[-2:] != s.shape[-2:] or v.shape[:-3] != s.shape[:-2]:
        raise ValueError(f"shape mismatch: v {tuple(v.shape)}, S {tuple(s.shape)}")
    return spatial_softmax(s).unsqueeze(-3) * v
