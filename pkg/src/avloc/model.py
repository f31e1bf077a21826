"""End-to-end localization network wiring encoders, cascade and temporal module."""
from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn as nn

from . import cascade, geometry, nets, objective

TEMPORAL_MODES = ("gatm", "max", "avg", "none")


@dataclass(frozen=True)
class ModelConfig:
    visual: nets.VisualEncoderConfig = field(default_factory=nets.VisualEncoderConfig)
    audio: nets.AudioUNetConfig = field(default_factory=nets.AudioUNetConfig)
    temporal: str = "gatm"
    soft_localization: bool = True
    disentangle: bool = True
    disentangle_output: str = "bn_relu"

    def __post_init__(self):
        if self.temporal not in TEMPORAL_MODES:
            raise ValueError(f"temporal must be one of {TEMPORAL_MODES}")
        if self.visual.channels != self.audio.channels:
            raise ValueError("visual and audio feature channels must match")


class LocalizationModel(nn.Module):
    def __init__(self, cfg: ModelConfig = ModelConfig()):
        super().__init__()
        self.cfg = cfg
        self.visual = nets.VisualEncoder(cfg.visual)
        self.audio = nets.AudioUNet(cfg.audio)
        self.disentangler = cascade.Disentangle(cfg.audio.channels, output=cfg.disentangle_output) if cfg.disentangle else None

    def param_groups(self):
        """(visual + temporal, audio) parameter lists for the two learning rates."""
        audio = list(self.audio.parameters())
        if self.disentangler is not None:
            audio += list(self.disentangler.parameters())
        return list(self.visual.parameters()), audio

    def encode_frames(self, frames: torch.Tensor) -> torch.Tensor:
        """(B, T, 3, H, W) -> (B, T, c, h, w)."""
        B, T = frames.shape[:2]
        v = self.visual(frames.flatten(0, 1))
        return v.unflatten(0, (B, T))

    def temporal(self, v_hat: torch.Tensor, warp_ops: torch.Tensor | None) -> torch.Tensor:
        mode = self.cfg.temporal
        if mode == "none":
            return v_hat
        if mode == "max":
            return v_hat.amax(dim=1, keepdim=True).expand_as(v_hat)
        if mode == "avg":
            return v_hat.mean(dim=1, keepdim=True).expand_as(v_hat)
        return geometry.gatm(v_hat, warp_ops)

    def forward(self, frames: torch.Tensor, spec: torch.Tensor, warp_ops: torch.Tensor | None = None):
        """frames (B, T, 3, H, W), spec (B, 1, F, Tf), warp_ops (B, T, T, hw, hw) or None."""
        v = self.encode_frames(frames)
        a, skips = self.audio.encode(spec)
        g_v = nets.pool_visual(v)
        a_hat = self.disentangler(a, g_v) if self.disentangler is not None else a
        m_pred = self.audio.decode(a_hat, skips)
        g_a = nets.pool_audio(a_hat)
        g_a_t = g_a.unsqueeze(1).expand(-1, v.shape[1], -1)
        if self.cfg.soft_localization:
            v_hat = cascade.soft_localize(v, cascade.av_attention(v, g_a_t))
        else:
            v_hat = v
        z = self.temporal(v_hat, warp_ops)
        s = cascade.av_attention(z, g_a_t)
        return {"v": v, "z": z, "g_a": g_a, "g_v": g_v, "a_hat": a_hat, "m_pred": m_pred, "S": s}


def compute_losses(out: dict, m_gt: torch.Tensor | None, cfg: objective.ObjectnessConfig):
    s_bar = objective.mil_pool(out["S"])
    o_bar = objective.objectness(s_bar, cfg)
    s_neg = objective.batch_negative_maps(out["z"], out["g_a"])
    p, n = objective.pos_neg_signals(o_bar, s_bar, s_neg)
    l_loc = objective.loc_loss(p, n)
    if m_gt is not None:
        l_dis = cascade.dis_loss(out["m_pred"], m_gt)
    else:
        l_dis = torch.zeros((), dtype=l_loc.dtype)
    return {"L_loc": l_loc, "L_dis": l_dis, "total": objective.total_loss(l_loc, l_dis, cfg),
            "P": p, "N": n}


def build_model(cfg: ModelConfig, seed: int) -> LocalizationModel:
    """Seeded construction; torch's default conv init is fan-in scaled uniform."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        return LocalizationModel(cfg)
