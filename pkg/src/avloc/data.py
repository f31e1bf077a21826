"""In-memory clip tensors for training and evaluation."""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import audiofe, geometry, synthgen
from .core import Homography, Waveform

log = logging.getLogger(__name__)


@dataclass
class ClipTensors:
    video_ids: list
    frames: torch.Tensor  # (N, T, 3, H, W)
    audio: np.ndarray  # (N, L) float32 recorded waveforms
    audio_clean: np.ndarray
    audio_distractor: np.ndarray
    specs: torch.Tensor  # (N, 1, F, Tf) spectrogram of the recorded audio
    warp_ops: torch.Tensor | None  # (N, T, T, hw, hw)
    boxes: list  # per clip, per frame list of BoundingBox
    sample_rate: int
    homographies: list = field(default_factory=list)  # per clip T x T pixel-level Homography

    def __len__(self):
        return len(self.video_ids)

    def audio_for(self, mode: str) -> np.ndarray:
        return {"recorded": self.audio, "clean": self.audio_clean,
                "distractor": self.audio_distractor}[mode]


def spectrogram_batch(waves: np.ndarray, cfg: audiofe.StftConfig, sample_rate: int) -> torch.Tensor:
    out = [audiofe.stft_magnitude(Waveform(w, sample_rate), cfg).values for w in waves]
    return torch.from_numpy(np.stack(out)[:, None])


def _homography_key(matcher, ransac) -> str:
    blob = json.dumps([vars(matcher), vars(ransac)], sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def clip_homographies(clip: synthgen.ClipRecord, source: str, matcher, ransac,
                      cache: geometry.HomographyCache | None = None):
    T = clip.T
    if source == "ground_truth":
        return [[clip.homography(j, i) for i in range(T)] for j in range(T)]
    if source == "identity":
        return [[Homography.identity(j, i) for i in range(T)] for j in range(T)]
    H = [[None] * T for _ in range(T)]
    for j in range(T):
        for i in range(T):
            if i == j:
                H[j][i] = Homography.identity(j, i)
                continue
            hit = cache.get(clip.video_id, j, i) if cache is not None else None
            if hit is None:
                m = geometry.match_features(clip.frames[j], clip.frames[i], matcher, j, i)
                hit = geometry.estimate_homography(m, ransac)
                if cache is not None:
                    cache.put(clip.video_id, hit)
            H[j][i] = hit
    return H


def feature_operators(H_pixel, downsample: int, grid_hw) -> torch.Tensor:
    s, o = geometry.feature_scale(downsample)
    T = len(H_pixel)
    H_feat = [[geometry.scale_homography(H_pixel[j][i], s, o) for i in range(T)] for j in range(T)]
    return geometry.warp_operators(H_feat, *grid_hw)


def load_split(dataset_dir, split: str, stft: audiofe.StftConfig, downsample: int,
               homographies: str = "estimated", matcher=geometry.MatcherConfig(),
               ransac=geometry.RansacConfig(), cache_dir=None) -> ClipTensors:
    root = Path(dataset_dir)
    manifest = synthgen.load_manifest(root)
    ids = manifest["splits"][split]
    paths = {c["video_id"]: c["path"] for c in manifest["clips"]}
    clips = [synthgen.read_clip(root / paths[v]) for v in ids]
    return tensors_from_clips(clips, stft, downsample, homographies, matcher, ransac,
                              cache_dir if cache_dir is not None else root)


def tensors_from_clips(clips, stft: audiofe.StftConfig, downsample: int,
                       homographies: str = "estimated", matcher=geometry.MatcherConfig(),
                       ransac=geometry.RansacConfig(), cache_dir=None) -> ClipTensors:
    if not clips:
        raise ValueError("no clips to load")
    rate = int(clips[0].waveform.sample_rate)
    if rate != stft.sample_rate:
        raise ValueError(f"clip audio at {rate} Hz but STFT expects {stft.sample_rate} Hz")
    cache = None
    if homographies == "estimated" and cache_dir is not None:
        cache = geometry.HomographyCache(Path(cache_dir) / f"homographies_{_homography_key(matcher, ransac)}.json")
    frames = torch.from_numpy(np.stack([c.frames for c in clips])).permute(0, 1, 4, 2, 3).contiguous()
    H, W = frames.shape[-2:]
    grid = (H // downsample, W // downsample)
    hs, ops = [], []
    for c in clips:
        Hc = clip_homographies(c, homographies, matcher, ransac, cache)
        hs.append(Hc)
        ops.append(feature_operators(Hc, downsample, grid))
    if cache is not None:
        cache.save()
    audio = np.stack([np.asarray(c.waveform.samples, np.float32) for c in clips])
    clean = np.stack([np.asarray(c.audio("clean").samples, np.float32) for c in clips])
    dist = np.stack([np.asarray(c.audio("distractor").samples, np.float32) for c in clips])
    return ClipTensors(
        video_ids=[c.video_id for c in clips],
        frames=frames,
        audio=audio,
        audio_clean=clean,
        audio_distractor=dist,
        specs=spectrogram_batch(audio, stft, rate),
        warp_ops=torch.stack(ops),
        boxes=[c.gt_boxes for c in clips],
        sample_rate=rate,
        homographies=hs,
    )
