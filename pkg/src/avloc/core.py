"""Shared value types, seeding and box utilities."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

DEFAULT_CHANNELS = 512


class OutOfBoundsError(ValueError):
    pass


def seed_rng(seed: int) -> np.random.Generator:
    """Deterministic random stream (PCG64) for one task."""
    return np.random.Generator(np.random.PCG64(int(seed)))


@dataclass(frozen=True)
class FrameSequence:
    frames: tuple  # of H x W x 3 float arrays in [0, 1]
    frame_indices: tuple
    center_index: int
    fps: float

    def __post_init__(self):
        if len(self.frames) < 1:
            raise ValueError("FrameSequence needs at least one frame")
        shapes = {np.asarray(f).shape for f in self.frames}
        if len(shapes) != 1:
            raise ValueError(f"frames differ in shape: {sorted(shapes)}")
        (shape,) = shapes
        if len(shape) != 3 or shape[2] != 3:
            raise ValueError(f"frames must be HxWx3, got {shape}")
        if len(self.frame_indices) != len(self.frames):
            raise ValueError("frame_indices must match the number of frames")
        if not 0 <= self.center_index < len(self.frames):
            raise ValueError(f"center_index {self.center_index} out of range")

    @property
    def T(self) -> int:
        return len(self.frames)

    @property
    def size(self) -> tuple[int, int]:
        h, w, _ = np.asarray(self.frames[0]).shape
        return h, w


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        s = np.asarray(self.samples)
        if s.ndim != 1:
            raise ValueError("waveform samples must be 1-D")
        if not np.all(np.isfinite(s)):
            raise ValueError("waveform contains non-finite samples")

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class Spectrogram:
    """Magnitude grid, rows are frequency bins and columns are time frames."""

    values: np.ndarray
    n_freq_bins: int
    hop_seconds: float

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2:
            raise ValueError("spectrogram must be 2-D")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("spectrogram entries must be finite and non-negative")

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True)
class FeatureGrid:
    values: np.ndarray  # c x h x w
    modality: str = "visual"
    frame_coordinate_scale: float | None = None

    def __post_init__(self):
        if self.modality not in ("visual", "audio"):
            raise ValueError(f"unknown modality {self.modality!r}")
        if np.asarray(self.values).ndim != 3:
            raise ValueError("feature grid must be c x h x w")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature grid contains non-finite entries")

    @property
    def channels(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class Homography:
    matrix: np.ndarray = field(default_factory=lambda: np.eye(3))
    valid: bool = True
    inlier_count: int = 0
    source_frame: int = 0
    target_frame: int = 0

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError("homography matrix must be 3x3")
        if not self.valid:
            m = np.eye(3)
        else:
            if not np.all(np.isfinite(m)) or abs(m[2, 2]) < 1e-12:
                raise ValueError("valid homography needs a finite matrix with h33 != 0")
            m = m / m[2, 2]
            if abs(np.linalg.det(m)) < 1e-12:
                raise ValueError("valid homography must be invertible")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls, source_frame: int = 0, target_frame: int = 0, valid: bool = True):
        return cls(np.eye(3), valid=valid, source_frame=source_frame, target_frame=target_frame)

    @classmethod
    def invalid(cls, source_frame: int = 0, target_frame: int = 0, inlier_count: int = 0):
        return cls(np.eye(3), valid=False, inlier_count=inlier_count,
                   source_frame=source_frame, target_frame=target_frame)

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.matrix, np.eye(3)))

    def apply(self, points) -> np.ndarray:
        return apply_homography(self.matrix, points)

    def inverse(self) -> "Homography":
        if not self.valid:
            return Homography.invalid(self.target_frame, self.source_frame, self.inlier_count)
        return Homography(np.linalg.inv(self.matrix), True, self.inlier_count,
                          self.target_frame, self.source_frame)


def apply_homography(H, points) -> np.ndarray:
    """Map N x 2 points (x, y) through a 3x3 matrix."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    ph = np.c_[pts, np.ones(len(pts))] @ np.asarray(H, dtype=np.float64).T
    return ph[:, :2] / ph[:, 2:3]


@dataclass(frozen=True)
class BoundingBox:
    """Pixel box with half-open extent: x_min <= x < x_max, y_min <= y < y_max."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int
    label: str = ""

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate box {self}")

    def check_bounds(self, height: int, width: int):
        if self.x_min < 0 or self.y_min < 0 or self.x_max > width or self.y_max > height:
            raise OutOfBoundsError(f"box {self.as_tuple()} outside {height}x{width} frame")

    def as_tuple(self):
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    @property
    def area(self) -> int:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def to_dict(self) -> dict:
        return {"x_min": self.x_min, "y_min": self.y_min, "x_max": self.x_max,
                "y_max": self.y_max, "label": self.label}

    @classmethod
    def from_dict(cls, d: dict) -> "BoundingBox":
        return cls(int(d["x_min"]), int(d["y_min"]), int(d["x_max"]), int(d["y_max"]),
                   str(d.get("label", "")))


@dataclass(frozen=True)
class LocalizationMap:
    similarity: np.ndarray
    objectness: np.ndarray
    frame_index: int = 0


@dataclass(frozen=True)
class AnnotationRecord:
    video_id: str
    frame_index: int
    annotator_id: str
    selected_boxes: tuple = ()
    out_of_view_sound: bool = False
    description: str = ""

    FIELDS = ("video_id", "frame_index", "annotator_id", "selected_boxes",
              "out_of_view_sound", "description")

    def to_dict(self) -> dict:
        return {
            "video_id": self.video_id,
            "frame_index": self.frame_index,
            "annotator_id": self.annotator_id,
            "selected_boxes": [b.to_dict() for b in self.selected_boxes],
            "out_of_view_sound": self.out_of_view_sound,
            "description": self.description,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnnotationRecord":
        missing = [k for k in cls.FIELDS if k not in d]
        if missing:
            raise ValueError(f"missing fields: {', '.join(missing)}")
        unknown = sorted(set(d) - set(cls.FIELDS))
        if unknown:
            raise ValueError(f"unknown fields: {', '.join(unknown)}")
        if not isinstance(d["out_of_view_sound"], bool):
            raise ValueError("out_of_view_sound must be a boolean")
        return cls(
            video_id=str(d["video_id"]),
            frame_index=int(d["frame_index"]),
            annotator_id=str(d["annotator_id"]),
            selected_boxes=tuple(BoundingBox.from_dict(b) for b in d["selected_boxes"]),
            out_of_view_sound=d["out_of_view_sound"],
            description=str(d["description"]),
        )


def boxes_to_mask(boxes: Sequence[BoundingBox], height: int, width: int) -> np.ndarray:
    """Union rasterization of boxes into a height x width {0,1} grid."""
    mask = np.zeros((height, width), dtype=np.uint8)
    for b in boxes:
        b.check_bounds(height, width)
        mask[b.y_min:b.y_max, b.x_min:b.x_max] = 1
    return mask
