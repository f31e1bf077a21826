"""CIoU / AUC metrics, the center-box baseline and annotation consensus voting."""
from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass

import numpy as np

from .core import AnnotationRecord, BoundingBox, LocalizationMap, boxes_to_mask


@dataclass(frozen=True)
class EvalConfig:
    threshold: float = 0.5  # binarization of the objectness map
    ciou_thresholds: tuple = (0.2, 0.3, 0.4)
    auc_thresholds: tuple = tuple(round(0.05 * k, 2) for k in range(1, 20))
    center_sigma_fraction: float = 0.15

    def __post_init__(self):
        for name in ("ciou_thresholds", "auc_thresholds"):
            ts = tuple(float(t) for t in getattr(self, name))
            object.__setattr__(self, name, ts)
            if not ts or any(not 0 < t < 1 for t in ts) or any(b <= a for a, b in zip(ts, ts[1:])):
                raise ValueError(f"{name} must be strictly increasing values in (0, 1)")
        if not 0 < self.threshold < 1:
            raise ValueError("threshold must be in (0, 1)")


def ciou_masks(pred: np.ndarray, gt: np.ndarray) -> float:
    p, g = np.asarray(pred, bool), np.asarray(gt, bool)
    union = np.logical_or(p, g).sum()
    if union == 0:
        raise ValueError("CIoU undefined for two empty masks")
    return float(np.logical_and(p, g).sum() / union)


def ciou(pred: LocalizationMap | np.ndarray, gt_boxes, cfg: EvalConfig = EvalConfig()) -> float:
    """IoU between the binarized objectness map (frame resolution) and the box union."""
    if not gt_boxes:
        raise ValueError("CIoU needs at least one ground-truth box")
    heat = pred.objectness if isinstance(pred, LocalizationMap) else np.asarray(pred)
    h, w = heat.shape
    return ciou_masks(heat >= cfg.threshold, boxes_to_mask(gt_boxes, h, w))


def success_rate(cious, threshold: float) -> float:
    return float((np.asarray(cious) >= threshold).mean())


def success_metrics(cious, cfg: EvalConfig = EvalConfig(), extra_thresholds=(0.5,)) -> dict:
    cious = np.asarray(cious, dtype=np.float64)
    if cious.size == 0:
        raise ValueError("no CIoU values to summarize")
    out = {f"ciou@{t:g}": success_rate(cious, t) for t in (*cfg.ciou_thresholds, *extra_thresholds)}
    out["auc"] = float(np.mean([success_rate(cious, t) for t in cfg.auc_thresholds]))
    out["mean_ciou"] = float(cious.mean())
    out["n"] = int(cious.size)
    return out


def center_baseline(height: int, width: int, sigma_fraction: float = 0.15) -> np.ndarray:
    """Isotropic Gaussian around the frame center, peak 1.

    Pixel centers sit at integer coordinates, so the frame's geometric center
    is ((W - 1) / 2, (H - 1) / 2).
    """
    sigma = sigma_fraction * min(height, width)
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    return np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2 * sigma ** 2))


def format_table(metrics: dict, title: str = "") -> str:
    cols = ["ciou@0.2", "ciou@0.3", "ciou@0.4", "auc"]
    head = f"{'':<12}| CIoU @0.2 | @0.3  | @0.4  | AUC"
    lines = [head, "-" * len(head)]
    for name, m in metrics.items():
        vals = [100 * m.get(c, float("nan")) for c in cols]
        lines.append(f"{name:<12}| {vals[0]:9.2f} | {vals[1]:5.2f} | {vals[2]:5.2f} | {vals[3]:5.2f}")
    return (title + "\n" if title else "") + "\n".join(lines)


# ---------------------------------------------------------------- voting

@dataclass(frozen=True)
class ConsensusAnnotation:
    video_id: str
    frame_index: int
    boxes: tuple = ()
    out_of_view_sound: bool = False
    valid: bool = False
    n_annotators: int = 0

    def to_dict(self) -> dict:
        return {"video_id": self.video_id, "frame_index": self.frame_index,
                "boxes": [b.to_dict() for b in self.boxes],
                "out_of_view": self.out_of_view_sound, "valid": self.valid,
                "n_annotators": self.n_annotators}


class InsufficientAnnotations(ValueError):
    pass


def _box_key(b: BoundingBox):
    return (b.x_min, b.y_min, b.x_max, b.y_max, b.label)


def vote(records: list[AnnotationRecord], min_annotators: int = 3, min_agree: int = 2) -> ConsensusAnnotation:
    """Consensus for one frame: keep boxes chosen by at least `min_agree` annotators.

    Boxes are precomputed proposals, so agreement is exact equality. The
    out-of-view flag follows the majority (ties resolve to False).
    """
    if len(records) < min_annotators:
        raise InsufficientAnnotations(f"{len(records)} annotations, need {min_annotators}")
    keys = {(r.video_id, r.frame_index) for r in records}
    if len(keys) != 1:
        raise ValueError(f"records span several frames: {sorted(keys)}")
    (video_id, frame_index), = keys
    votes: Counter = Counter()
    for r in records:
        for b in set(r.selected_boxes):
            votes[b] += 1
    agreed = tuple(sorted((b for b, n in votes.items() if n >= min_agree), key=_box_key))
    yes = sum(r.out_of_view_sound for r in records)
    return ConsensusAnnotation(video_id, frame_index, agreed, yes > len(records) - yes,
                               bool(agreed), len(records))


def vote_all(records: list[AnnotationRecord]) -> tuple[list[ConsensusAnnotation], dict]:
    by_frame = defaultdict(list)
    for r in records:
        by_frame[(r.video_id, r.frame_index)].append(r)
    out, insufficient = [], 0
    for key in sorted(by_frame):
        try:
            out.append(vote(by_frame[key]))
        except InsufficientAnnotations:
            insufficient += 1
            out.append(ConsensusAnnotation(key[0], key[1], n_annotators=len(by_frame[key])))
    kept = [c for c in out if c.valid]
    videos_after = {c.video_id for c in kept}
    stats = {
        "videos_before": len({k[0] for k in by_frame}),
        "frames_before": len(by_frame),
        "videos_after": len(videos_after),
        "frames_after": len(kept),
        "frames_insufficient": insufficient,
        "out_of_view_frames": sum(c.out_of_view_sound for c in kept),
        "out_of_view_videos": len({c.video_id for c in kept if c.out_of_view_sound}),
        "classes": len({b.label for c in kept for b in c.boxes}),
    }
    return out, stats
