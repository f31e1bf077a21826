"""Optimization step, training loop and model evaluation on a clip split."""
from __future__ import annotations

import json
import logging
import math
import pickle
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from . import audiofe, evaluate, objective
from .core import seed_rng
from .data import ClipTensors, spectrogram_batch
from .model import LocalizationModel, build_model, compute_losses

log = logging.getLogger(__name__)


class NonFiniteLoss(RuntimeError):
    pass


@dataclass
class Batch:
    frames: torch.Tensor
    spec: torch.Tensor  # network input: mixture when mixing, else the clip's own audio
    m_gt: torch.Tensor | None
    warp_ops: torch.Tensor | None
    index: list


def make_optimizer(model: LocalizationModel, lr_visual: float, lr_audio: float,
                   weight_decay: float = 0.0) -> torch.optim.Adam:
    visual, audio = model.param_groups()
    return torch.optim.Adam([
        {"params": visual, "lr": lr_visual, "name": "visual"},
        {"params": audio, "lr": lr_audio, "name": "audio"},
    ], weight_decay=weight_decay)


def make_batch(data: ClipTensors, index, stft: audiofe.StftConfig, rng: np.random.Generator | None,
               mixing: bool, use_warps: bool = True) -> Batch:
    """Mix each clip's audio with a random other training clip (mix-and-separate)."""
    idx = list(index)
    ops = data.warp_ops[idx] if (use_warps and data.warp_ops is not None) else None
    if not mixing:
        return Batch(data.frames[idx], data.specs[idx], None, ops, idx)
    n = len(data)
    partners = []
    for k in idx:
        p = int(rng.integers(n - 1))
        partners.append(p + (p >= k))
    mixture = data.audio[idx] + data.audio[partners]
    x_mix = spectrogram_batch(mixture, stft, data.sample_rate)
    x1 = data.specs[idx]
    return Batch(data.frames[idx], x_mix, audiofe.ground_truth_mask_torch(x1, x_mix), ops, idx)


def train_step(model: LocalizationModel, optimizer: torch.optim.Optimizer, batch: Batch,
               cfg: objective.ObjectnessConfig) -> dict:
    model.train()
    optimizer.zero_grad(set_to_none=True)
    out = model(batch.frames, batch.spec, batch.warp_ops)
    losses = compute_losses(out, batch.m_gt, cfg)
    report = {k: float(losses[k].detach()) for k in ("L_loc", "L_dis", "total")}
    if not all(math.isfinite(v) for v in report.values()):
        raise NonFiniteLoss(f"non-finite loss {report}; P={losses['P'].tolist()} N={losses['N'].tolist()}")
    losses["total"].backward()
    optimizer.step()
    return report


def epoch_batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    batches = [order[k:k + batch_size] for k in range(0, n, batch_size)]
    if len(batches) > 1 and len(batches[-1]) < 2:
        batches[-2] = np.concatenate([batches[-2], batches[-1]])
        batches.pop()
    return batches


def fit(model: LocalizationModel, data: ClipTensors, *, epochs: int, batch_size: int,
        lr_visual: float, lr_audio: float, stft: audiofe.StftConfig,
        objectness_cfg: objective.ObjectnessConfig, seed: int, mixing: bool = True,
        weight_decay: float = 0.0, out_dir: Path | None = None, run_config: dict | None = None,
        on_epoch=None) -> list[dict]:
    """Train in place; writes metrics.jsonl and per-epoch checkpoints when out_dir is set."""
    rng = seed_rng(seed)
    optimizer = make_optimizer(model, lr_visual, lr_audio, weight_decay)
    history, step = [], 0
    metrics_f = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        metrics_f = open(out_dir / "metrics.jsonl", "w")
    try:
        for epoch in range(epochs):
            for idx in epoch_batches(len(data), batch_size, rng):
                batch = make_batch(data, idx, stft, rng, mixing, model.cfg.temporal == "gatm")
                rep = train_step(model, optimizer, batch, objectness_cfg)
                step += 1
                rep = {"step": step, "epoch": epoch, **rep}
                history.append(rep)
                if metrics_f is not None:
                    metrics_f.write(json.dumps(rep) + "\n")
            if out_dir is not None:
                save(model, out_dir / f"checkpoint_epoch{epoch:03d}.pt", run_config, epoch)
                save(model, out_dir / "checkpoint.pt", run_config, epoch)
            if on_epoch is not None:
                on_epoch(epoch, history)
            log.info("epoch %d: total %.4f", epoch, history[-1]["total"])
    finally:
        if metrics_f is not None:
            metrics_f.close()
    return history


def save(model: LocalizationModel, path: Path, run_config: dict | None, epoch: int | None = None):
    torch.save({"run_config": run_config, "state_dict": model.state_dict(), "epoch": epoch}, path)


def load(path) -> tuple[LocalizationModel, dict]:
    from .config import parse_config
    from .nets import load_state_checked
    try:
        ckpt = torch.load(path, map_location="cpu", weights_only=False)
        raw = ckpt["run_config"]
    except (pickle.UnpicklingError, EOFError, RuntimeError, KeyError, TypeError) as e:
        raise ValueError(f"cannot read checkpoint {path}: {e}") from None
    cfg = parse_config(raw)
    model = build_model(cfg.network_config(), cfg.seed)
    load_state_checked(model, ckpt["state_dict"])
    model.eval()
    return model, raw


# ---------------------------------------------------------------- evaluation

@torch.no_grad()
def predict_objectness(model: LocalizationModel, data: ClipTensors, stft: audiofe.StftConfig,
                       objectness_cfg: objective.ObjectnessConfig, audio_mode: str = "recorded",
                       batch_size: int = 32) -> np.ndarray:
    """Per-frame objectness maps upsampled to frame size: (N, T, H, W)."""
    model.eval()
    waves = data.audio_for(audio_mode)
    specs = data.specs if audio_mode == "recorded" else spectrogram_batch(waves, stft, data.sample_rate)
    H, W = data.frames.shape[-2:]
    out = []
    use_warps = model.cfg.temporal == "gatm"
    for k in range(0, len(data), batch_size):
        sl = slice(k, k + batch_size)
        ops = data.warp_ops[sl] if use_warps else None
        res = model(data.frames[sl], specs[sl], ops)
        o = objective.objectness(res["S"], objectness_cfg)
        B, T = o.shape[:2]
        up = F.interpolate(o.flatten(0, 1)[:, None], size=(H, W), mode="bilinear", align_corners=False)
        out.append(up[:, 0].unflatten(0, (B, T)).numpy())
    return np.concatenate(out)


def score_heatmaps(heatmaps: np.ndarray, boxes, cfg: evaluate.EvalConfig) -> list[float]:
    """CIoU for every frame that has ground-truth boxes."""
    cious = []
    for clip_maps, clip_boxes in zip(heatmaps, boxes):
        for m, fb in zip(clip_maps, clip_boxes):
            if fb:
                cious.append(evaluate.ciou(m, fb, cfg))
    return cious


def center_baseline_cious(data: ClipTensors, cfg: evaluate.EvalConfig) -> list[float]:
    H, W = data.frames.shape[-2:]
    heat = evaluate.center_baseline(H, W, cfg.center_sigma_fraction)
    maps = np.broadcast_to(heat, (len(data), data.frames.shape[1], H, W))
    return score_heatmaps(maps, data.boxes, cfg)


def evaluate_model(model, data: ClipTensors, stft, objectness_cfg, eval_cfg: evaluate.EvalConfig,
                   audio_mode: str = "recorded") -> dict:
    maps = predict_objectness(model, data, stft, objectness_cfg, audio_mode)
    model_m = evaluate.success_metrics(score_heatmaps(maps, data.boxes, eval_cfg), eval_cfg)
    base_m = evaluate.success_metrics(center_baseline_cious(data, eval_cfg), eval_cfg)
    return {"model": model_m, "center_baseline": base_m}
