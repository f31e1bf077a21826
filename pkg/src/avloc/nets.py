"""Visual encoder, audio U-Net and the pooling reductions feeding the cascade."""
from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn


@dataclass(frozen=True)
class VisualEncoderConfig:
    """Plain conv encoder; each width is one stride-2 stage, so D_v = 2**len(widths)."""

    widths: tuple = (64, 128, 256)
    channels: int = 512
    output_relu: bool = True  # non-negative embeddings, like a post-ReLU backbone
    padding_mode: str = "reflect"  # zero padding leaks absolute position at the borders

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if not self.widths or min(self.widths) <= 0 or self.channels <= 0:
            raise ValueError("visual encoder widths/channels must be positive")

    @property
    def downsample(self) -> int:
        return 2 ** len(self.widths)


@dataclass(frozen=True)
class AudioUNetConfig:
    """Five 4x4/stride-2 conv stages mirrored by five up-convolutions."""

    widths: tuple = (64, 128, 256, 512, 512)
    input_size: tuple = (128, 128)

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        object.__setattr__(self, "input_size", tuple(int(s) for s in self.input_size))
        if len(self.widths) != 5:
            raise ValueError("the audio U-Net has exactly five encoder stages")
        if any(s % 32 for s in self.input_size):
            raise ValueError("spectrogram sides must be divisible by 2**5")

    @property
    def channels(self) -> int:
        return self.widths[-1]

    @property
    def bottleneck_size(self) -> tuple:
        return tuple(s // 32 for s in self.input_size)


def _conv_bn_relu(cin, cout, stride, padding_mode="zeros"):
    # 4x4/stride-2 keeps output cell i centred on input 2i + 0.5, so after the
    # last stage cell i sits at pixel D*i + (D-1)/2: the cell-centre convention
    # of bilinear upsampling and of the pixel-to-cell homography rescaling.
    k = 4 if stride == 2 else 3
    return nn.Sequential(
        nn.Conv2d(cin, cout, k, stride=stride, padding=1, bias=False, padding_mode=padding_mode),
        nn.BatchNorm2d(cout),
        nn.ReLU(inplace=True),
    )


class VisualEncoder(nn.Module):
    def __init__(self, cfg: VisualEncoderConfig = VisualEncoderConfig()):
        super().__init__()
        self.cfg = cfg
        layers, cin = [], 3
        for w in cfg.widths:
            layers += [_conv_bn_relu(cin, w, 2, cfg.padding_mode), _conv_bn_relu(w, w, 1, cfg.padding_mode)]
            cin = w
        self.body = nn.Sequential(*layers)
        self.proj = nn.Conv2d(cin, cfg.channels, 1)

    def forward(self, frames: torch.Tensor) -> torch.Tensor:
        """frames: (N, 3, H, W) in [0, 1] -> (N, c, H/D_v, W/D_v)."""
        if frames.dim() != 4 or frames.shape[1] != 3:
            raise ValueError(f"expected (N, 3, H, W) frames, got {tuple(frames.shape)}")
        d = self.cfg.downsample
        h, w = frames.shape[-2:]
        if h % d or w % d:
            raise ValueError(f"frame size {h}x{w} not divisible by D_v={d}")
        v = self.proj(self.body(frames))
        return torch.relu(v) if self.cfg.output_relu else v


class AudioUNet(nn.Module):
    def __init__(self, cfg: AudioUNetConfig = AudioUNetConfig()):
        super().__init__()
        self.cfg = cfg
        w = cfg.widths
        self.down = nn.ModuleList()
        cin = 1
        for cout in w:
            self.down.append(nn.Sequential(
                nn.Conv2d(cin, cout, 4, stride=2, padding=1, bias=False),
                nn.BatchNorm2d(cout),
                nn.ReLU(inplace=True),
            ))
            cin = cout
        # decoder layer k consumes the previous decoder output concatenated with
        # encoder layer n-k (same resolution)
        outs = [w[3], w[2], w[1], w[0], 1]
        ins = [w[4], 2 * w[3], 2 * w[2], 2 * w[1], 2 * w[0]]
        self.up = nn.ModuleList()
        for k, (ci, co) in enumerate(zip(ins, outs)):
            if k < 4:
                self.up.append(nn.Sequential(
                    nn.ConvTranspose2d(ci, co, 4, stride=2, padding=1, bias=False),
                    nn.BatchNorm2d(co),
                    nn.ReLU(inplace=True),
                ))
            else:
                self.up.append(nn.ConvTranspose2d(ci, co, 4, stride=2, padding=1))

    def encode(self, spec: torch.Tensor):
        """spec: (N, 1, F, T) -> bottleneck (N, c, F/32, T/32) and skip states."""
        if spec.dim() != 4 or spec.shape[1] != 1 or tuple(spec.shape[-2:]) != self.cfg.input_size:
            raise ValueError(f"expected (N, 1, {self.cfg.input_size[0]}, {self.cfg.input_size[1]}) "
                             f"spectrograms, got {tuple(spec.shape)}")
        skips, x = [], spec
        for layer in self.down:
            x = layer(x)
            skips.append(x)
        return x, skips[:-1]

    def decode(self, a_hat: torch.Tensor, skips) -> torch.Tensor:
        """Separation mask in (0, 1) with the spectrogram's shape."""
        if len(skips) != 4:
            raise ValueError("decode needs the four skip states from encode")
        expected = (a_hat.shape[0], self.cfg.channels, *self.cfg.bottleneck_size)
        if tuple(a_hat.shape) != expected:
            raise ValueError(f"a_hat shape {tuple(a_hat.shape)} != {expected}")
        x = self.up[0](a_hat)
        for layer, skip in zip(self.up[1:], reversed(skips)):
            if skip.shape[0] != x.shape[0] or skip.shape[-2:] != x.shape[-2:]:
                raise ValueError("skip state does not match decoder resolution")
            x = layer(torch.cat([x, skip], dim=1))
        return torch.sigmoid(x)


def pool_visual(v: torch.Tensor) -> torch.Tensor:
    """(..., T, c, h, w) -> (..., c): spatial mean then max over time."""
    if v.dim() < 4 or v.shape[-4] == 0:
        raise ValueError("pool_visual needs a non-empty (..., T, c, h, w) stack")
    return v.mean(dim=(-2, -1)).amax(dim=-2)


def pool_audio(a_hat: torch.Tensor) -> torch.Tensor:
    """(..., c, h, w) -> (..., c): max over time and frequency."""
    if a_hat.dim() < 3:
        raise ValueError("pool_audio needs a (..., c, h, w) grid")
    return a_hat.amax(dim=(-2, -1))


def save_checkpoint(path, model: nn.Module, config: dict, extra: dict | None = None):
    torch.save({"config": config, "state_dict": model.state_dict(), **(extra or {})}, path)


def load_state_checked(model: nn.Module, state_dict: dict):
    own = model.state_dict()
    bad = [k for k in own if k not in state_dict or state_dict[k].shape != own[k].shape]
    extra = [k for k in state_dict if k not in own]
    if bad or extra:
        raise ValueError(f"checkpoint incompatible with model: mismatched {bad[:5]}, unexpected {extra[:5]}")
    model.load_state_dict(state_dict)
