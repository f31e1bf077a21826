"""Objectness thresholding, MIL pooling and the contrastive localization loss."""
from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .cascade import av_attention

AREA_EPS = 1e-8


@dataclass(frozen=True)
class ObjectnessConfig:
    epsilon: float = 0.5
    tau: float = 0.03
    lam: float = 5.0

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")


def objectness(s: torch.Tensor, cfg: ObjectnessConfig = ObjectnessConfig()) -> torch.Tensor:
    return torch.sigmoid((s - cfg.epsilon) / cfg.tau)


def mil_pool(s: torch.Tensor) -> torch.Tensor:
    """(..., T, h, w) -> (..., h, w): per-cell softmax over time, then weighted sum."""
    if s.dim() < 3 or s.shape[-3] == 0:
        raise ValueError("mil_pool needs a non-empty (..., T, h, w) stack")
    w = torch.softmax(s, dim=-3)
    return (w * s).sum(dim=-3)


def pos_neg_signals(o_bar: torch.Tensor, s_bar: torch.Tensor, s_neg: torch.Tensor):
    """P = <O, S> / sum(O) and N = mean(S_neg), per leading index."""
    if o_bar.shape != s_bar.shape:
        raise ValueError("objectness and similarity maps must share a shape")
    p = (o_bar * s_bar).sum(dim=(-2, -1)) / (o_bar.sum(dim=(-2, -1)) + AREA_EPS)
    n = s_neg.mean(dim=(-2, -1))
    return p, n


def loc_loss(p: torch.Tensor, n: torch.Tensor) -> torch.Tensor:
    """Batch mean of -log(e^P / (e^P + e^N)) written as softplus(N - P)."""
    if p.numel() < 1:
        raise ValueError("empty batch")
    return F.softplus(n - p).mean()


def total_loss(l_loc, l_dis, cfg: ObjectnessConfig = ObjectnessConfig()):
    return l_loc + cfg.lam * l_dis


def roll_pairing(batch_size: int) -> list[int]:
    """Sample k takes its negative audio from sample (k + 1) mod batch_size."""
    if batch_size < 2:
        raise ValueError("negatives need a batch of at least two clips")
    return [(k + 1) % batch_size for k in range(batch_size)]


def negative_map(z: torch.Tensor, g_a_neg: torch.Tensor) -> torch.Tensor:
    """MIL-pooled cosine map of (..., T, c, h, w) visual features against a mismatched audio vector."""
    s = av_attention(z, g_a_neg.unsqueeze(-2).expand(*z.shape[:-3], g_a_neg.shape[-1]))
    return mil_pool(s)


def batch_negative_maps(z: torch.Tensor, g_a: torch.Tensor) -> torch.Tensor:
    """z: (B, T, c, h, w), g_a: (B, c) -> (B, h, w) negatives under roll-by-one pairing."""
    pairing = roll_pairing(z.shape[0])
    return negative_map(z, g_a[pairing])
