"""Dataset synthesis, training and evaluation as plain functions (the CLI wraps these)."""
from __future__ import annotations

import json
import logging
import time
from pathlib import Path

import numpy as np
import torch
from PIL import Image, ImageDraw

from . import evaluate, synthgen
from .config import RunConfig, dump_config
from .core import AnnotationRecord
from .data import ClipTensors, load_split
from .model import build_model
from .train import evaluate_model, fit, load, predict_objectness

log = logging.getLogger(__name__)


def synth(cfg: RunConfig, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "config.yaml")
    manifest = synthgen.generate_dataset(cfg.data.n_clips, cfg.data.base_seed, cfg.scene_config(), out)
    return {"clips": len(manifest["clips"]),
            "splits": {k: len(v) for k, v in manifest["splits"].items()},
            "hash": manifest["hash"]}


def load_data(cfg: RunConfig, data_dir, split: str) -> ClipTensors:
    return load_split(data_dir, split, cfg.stft_config(), cfg.network_config().visual.downsample,
                      cfg.train.homographies, cfg.matcher_config(), cfg.ransac_config())


def train(cfg: RunConfig, data_dir, out_dir, data: ClipTensors | None = None) -> dict:
    """Train on the 'train' split; checkpoints, metrics.jsonl and config.yaml land in out_dir."""
    torch.set_num_threads(1)  # bit-reproducible CPU reductions
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "config.yaml")
    t0 = time.time()
    if data is None:
        data = load_data(cfg, data_dir, "train")
    model = build_model(cfg.network_config(), cfg.seed)
    history = fit(model, data, epochs=cfg.train.epochs, batch_size=cfg.train.batch_size,
                  lr_visual=cfg.train.lr_visual, lr_audio=cfg.train.lr_audio,
                  stft=cfg.stft_config(), objectness_cfg=cfg.objectness_config(), seed=cfg.seed,
                  mixing=cfg.train.mixing, weight_decay=cfg.train.weight_decay, out_dir=out,
                  run_config=cfg.model_dump(mode="json"))
    summary = {"steps": len(history), "epochs": cfg.train.epochs, "final": history[-1],
               "seconds": round(time.time() - t0, 2)}
    (out / "summary.json").write_text(json.dumps(summary, indent=1))
    return summary


def evaluate_checkpoint(checkpoint, data_dir, split: str = "test", audio_mode: str = "recorded",
                        out_path=None, cfg: RunConfig | None = None) -> dict:
    torch.set_num_threads(1)
    model, raw = load(checkpoint)
    if cfg is None:
        from .config import parse_config
        cfg = parse_config(raw)
    data = load_data(cfg, data_dir, split)
    report = evaluate_model(model, data, cfg.stft_config(), cfg.objectness_config(),
                            cfg.eval_config(), audio_mode)
    report.update(split=split, audio=audio_mode, clips=len(data))
    if out_path is not None:
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        Path(out_path).write_text(json.dumps(report, indent=1))
    return report


def visualize(checkpoint, data_dir, video_id: str, out_dir, alpha: float = 0.5) -> list[Path]:
    """Write one heatmap-over-frame PNG per frame with ground-truth boxes outlined."""
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must be in [0, 1]")
    from .config import parse_config
    from .data import tensors_from_clips
    model, raw = load(checkpoint)
    cfg = parse_config(raw)
    manifest = synthgen.load_manifest(data_dir)
    paths = {c["video_id"]: c["path"] for c in manifest["clips"]}
    if video_id not in paths:
        raise KeyError(f"clip {video_id} not in dataset {data_dir}")
    clip = synthgen.read_clip(Path(data_dir) / paths[video_id])
    data = tensors_from_clips([clip], cfg.stft_config(), cfg.network_config().visual.downsample,
                              cfg.train.homographies, cfg.matcher_config(), cfg.ransac_config())
    heat = predict_objectness(model, data, cfg.stft_config(), cfg.objectness_config())[0]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for k, (frame, h) in enumerate(zip(clip.frames, heat)):
        overlay = overlay_heatmap(frame, h, alpha)
        img = Image.fromarray(overlay)
        draw = ImageDraw.Draw(img)
        for b in clip.gt_boxes[k]:
            # half-open box -> inclusive outline
            draw.rectangle([b.x_min, b.y_min, b.x_max - 1, b.y_max - 1], outline=(0, 255, 0))
        path = out / f"{video_id}_frame{k:02d}.png"
        img.save(path)
        written.append(path)
    return written


def overlay_heatmap(frame: np.ndarray, heat: np.ndarray, alpha: float = 0.5) -> np.ndarray:
    """Blend a red heatmap over an RGB float frame; per-pixel alpha = alpha * heat."""
    a = alpha * np.clip(heat, 0.0, 1.0)[..., None]
    red = np.zeros_like(frame)
    red[..., 0] = 1.0
    return np.round(255 * ((1 - a) * frame + a * red)).astype(np.uint8)


class MalformedRecords(ValueError):
    pass


def read_annotation_records(path) -> list[AnnotationRecord]:
    records, errors = [], []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            records.append(AnnotationRecord.from_dict(json.loads(line)))
        except (json.JSONDecodeError, ValueError, TypeError, KeyError) as e:
            errors.append(f"line {lineno}: {e}")
    if errors:
        raise MalformedRecords("malformed annotation records:\n  " + "\n  ".join(errors))
    return records


def vote_file(records_path, out_path) -> dict:
    records = read_annotation_records(records_path)
    consensus, stats = evaluate.vote_all(records)
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("".join(json.dumps(c.to_dict()) + "\n" for c in consensus))
    return stats
