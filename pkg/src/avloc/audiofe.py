"""Audio frontend: resampling, STFT magnitudes, mixing and separation masks."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import torch
import torch.nn.functional as F
from scipy import signal

from .core import Spectrogram, Waveform


@dataclass(frozen=True)
class StftConfig:
    sample_rate: int = 11025
    window: str = "hann"
    window_size: int = 254
    hop: int = 64
    output_size: tuple = (128, 128)

    def __post_init__(self):
        if not self.window_size > self.hop > 0:
            raise ValueError("need window_size > hop > 0")
        if len(self.output_size) != 2 or min(self.output_size) <= 0:
            raise ValueError("output_size must be two positive ints")
        if self.window != "hann":
            raise ValueError("only the Hann window is supported")
        object.__setattr__(self, "output_size", tuple(int(s) for s in self.output_size))

    @property
    def n_freq_bins(self) -> int:
        return self.window_size // 2 + 1

    @property
    def bin_hz(self) -> float:
        return self.sample_rate / self.window_size


def resample(w: Waveform, target_rate: float) -> Waveform:
    if len(w.samples) == 0:
        raise ValueError("cannot resample an empty waveform")
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    if target_rate == w.sample_rate:
        return Waveform(np.array(w.samples, copy=True), w.sample_rate)
    ratio = Fraction(target_rate / w.sample_rate).limit_denominator(10000)
    up, down = ratio.numerator, ratio.denominator
    x = np.asarray(w.samples, dtype=np.float64)
    # odd-reflection padding keeps the signal smooth across both ends, so the
    # filter transient lands in the discarded margin; pad is a multiple of `down`
    pad = min(20 * max(up, down), len(x) - 1) // down * down
    if pad:
        x = np.concatenate([2 * x[0] - x[pad:0:-1], x, 2 * x[-1] - x[-2:-pad - 2:-1]])
    out = signal.resample_poly(x, up, down, window=("kaiser", 8.0))
    n_out = int(round(len(w.samples) * target_rate / w.sample_rate))
    start = pad * up // down
    out = out[start:start + n_out]
    if len(out) < n_out:
        out = np.pad(out, (0, n_out - len(out)))
    return Waveform(out.astype(np.asarray(w.samples).dtype, copy=False), target_rate)


def hann_window(n: int) -> np.ndarray:
    # periodic Hann, the usual STFT convention
    return signal.get_window("hann", n, fftbins=True)


def magnitude_stft(samples: np.ndarray, cfg: StftConfig) -> np.ndarray:
    """Un-resized |STFT|, shape (n_freq_bins, n_frames); frames start at 0, no padding."""
    x = np.asarray(samples, dtype=np.float64)
    if len(x) < cfg.window_size:
        raise ValueError(f"waveform has {len(x)} samples, need at least {cfg.window_size}")
    frames = np.lib.stride_tricks.sliding_window_view(x, cfg.window_size)[::cfg.hop]
    spec = np.fft.rfft(frames * hann_window(cfg.window_size), axis=1)
    return np.abs(spec).T


def resize_bilinear(grid: np.ndarray, size) -> np.ndarray:
    t = torch.from_numpy(np.ascontiguousarray(grid, dtype=np.float64))[None, None]
    out = F.interpolate(t, size=tuple(size), mode="bilinear", align_corners=False)
    return out[0, 0].numpy()


def stft_magnitude(w: Waveform, cfg: StftConfig = StftConfig()) -> Spectrogram:
    if w.sample_rate != cfg.sample_rate:
        raise ValueError(f"waveform rate {w.sample_rate} != configured {cfg.sample_rate}")
    mag = magnitude_stft(w.samples, cfg)
    values = np.maximum(resize_bilinear(mag, cfg.output_size), 0.0).astype(np.float32)
    return Spectrogram(values, cfg.n_freq_bins, cfg.hop / cfg.sample_rate)


def mix(s1: Waveform, s2: Waveform) -> Waveform:
    """Sum two streams, trimming both to the shorter length."""
    if s1.sample_rate != s2.sample_rate:
        raise ValueError(f"sample rate mismatch: {s1.sample_rate} vs {s2.sample_rate}")
    n = min(len(s1.samples), len(s2.samples))
    return Waveform(np.asarray(s1.samples)[:n] + np.asarray(s2.samples)[:n], s1.sample_rate)


def ground_truth_mask(x1: Spectrogram | np.ndarray, xmix: Spectrogram | np.ndarray) -> np.ndarray:
    """1 where the original source magnitude is at least the mixture magnitude."""
    a = x1.values if isinstance(x1, Spectrogram) else np.asarray(x1)
    b = xmix.values if isinstance(xmix, Spectrogram) else np.asarray(xmix)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return (a >= b).astype(np.float32)


def ground_truth_mask_torch(x1: torch.Tensor, xmix: torch.Tensor) -> torch.Tensor:
    if x1.shape != xmix.shape:
        raise ValueError(f"shape mismatch: {tuple(x1.shape)} vs {tuple(xmix.shape)}")
    return (x1 >= xmix).to(x1.dtype)
