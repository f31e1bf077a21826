"""Synthetic clips with exact ground truth: camera homographies, boxes and sources.

A clip views a static planar world (procedural noise plus textured rectangles)
through a camera that moves between frames. Every frame is rendered by
evaluating the world analytically at G_k^-1 p, so H_ji = G_i G_j^-1 is exact.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.io import wavfile

from .core import BoundingBox, FrameSequence, Homography, Waveform, apply_homography, seed_rng

CLASS_NAMES = ("kettle", "pan", "tap", "blender", "bowl", "drawer")
# Each class sounds as a harmonic family (fundamental plus overtones below
# HARMONIC_CEILING) with its own amplitude-modulation rate. Pure tones would
# differ only by a shift along the frequency axis, which a convolutional
# encoder followed by global max pooling cannot tell apart.
CLASS_TONES = (220.0, 330.0, 470.0, 640.0, 280.0, 400.0)
CLASS_AM_RATES = (3.0, 5.0, 8.0, 12.0, 4.0, 10.0)
HARMONIC_CEILING = 2000.0
# off-screen distractors: pure tones in a band disjoint from every class family
DISTRACTOR_TONES = (2600.0, 3200.0, 3900.0, 4600.0)
CLASS_COLORS = (
    (0.95, 0.15, 0.15),
    (0.15, 0.85, 0.2),
    (0.2, 0.3, 0.95),
    (0.95, 0.85, 0.1),
    (0.9, 0.2, 0.9),
    (0.1, 0.9, 0.9),
)


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SceneConfig:
    frame_size: tuple = (64, 64)  # (H, W)
    T: int = 5
    frame_interval: int = 2
    fps: float = 30.0
    sample_rate: int = 11025
    duration: float = 1.0
    # camera motion per step; all magnitudes are multiplied by motion_scale
    motion_scale: float = 1.0
    max_translation: float = 3.0  # px
    max_rotation_deg: float = 2.0
    max_zoom: float = 0.03
    max_perspective: float = 2e-4  # 1/px
    min_overlap: float = 0.6
    # objects
    n_classes: int = 4
    object_size: tuple = (14, 20)  # px side range
    n_silent_objects: int = 0
    object_velocity: float = 0.0  # world px per frame, 0 keeps the world rigid
    occlusion_prob: float = 0.0  # per-frame chance that the sounding object is veiled
    occlusion_strength: float = 0.8
    # audio
    tone_amplitude: float = 0.25
    tone_jitter: float = 0.02
    silent_prob: float = 0.0  # chance the on-screen object makes no sound
    distractor_prob: float = 0.5
    distractor_snr_db: float = 0.0
    noise_level: float = 0.005
    texture_seed_offset: int = 7919

    def __post_init__(self):
        object.__setattr__(self, "frame_size", tuple(int(s) for s in self.frame_size))
        object.__setattr__(self, "object_size", tuple(int(s) for s in self.object_size))
        if self.T < 1 or min(self.frame_size) <= 0:
            raise ValueError("need T >= 1 and a positive frame size")
        if not 1 <= self.n_classes <= len(CLASS_NAMES):
            raise ValueError(f"n_classes must be in [1, {len(CLASS_NAMES)}]")
        if self.n_silent_objects >= self.n_classes and self.n_silent_objects > 0:
            raise ValueError("silent objects need classes distinct from the sounding one")
        if not 0 < self.min_overlap <= 1:
            raise ValueError("min_overlap must be in (0, 1]")
        lo, hi = self.object_size
        if not 0 < lo <= hi < min(self.frame_size) // 2:
            raise ValueError("object_size range must fit in half the frame")

    @property
    def center_index(self) -> int:
        return self.T // 2

    @property
    def n_samples(self) -> int:
        return int(round(self.sample_rate * self.duration))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class ClipRecord:
    video_id: str
    frames: np.ndarray  # (T, H, W, 3) float32, multiples of 1/255
    waveform: Waveform
    sources: dict  # name -> Waveform: "object", "distractor"
    gt_homographies: np.ndarray  # (T, T, 3, 3); [j, i] maps frame j -> frame i
    gt_boxes: list  # per frame, list of BoundingBox (empty if out of view)
    label: str
    distractor_on: bool
    silent: bool
    frame_indices: tuple
    center_index: int
    fps: float
    seed: int
    config: dict = field(default_factory=dict)
    silent_boxes: list = field(default_factory=list)  # per frame, non-sounding objects

    @property
    def T(self) -> int:
        return len(self.frames)

    def frame_sequence(self) -> FrameSequence:
        return FrameSequence(tuple(self.frames), self.frame_indices, self.center_index, self.fps)

    def homography(self, j: int, i: int) -> Homography:
        return Homography(self.gt_homographies[j, i], True, 0, j, i)

    def audio(self, mode: str = "recorded") -> Waveform:
        """recorded | clean (object only) | distractor (object + distractor tone)."""
        if mode == "recorded":
            return self.waveform
        obj = self.sources["object"]
        if mode == "clean":
            return obj
        if mode == "distractor":
            return _int16_sum(obj, self.sources["distractor"])
        raise ValueError(f"unknown audio mode {mode!r}")


# ---------------------------------------------------------------- world

class _ValueNoise:
    """Smooth value noise over a bounded lattice, evaluated at arbitrary points."""

    def __init__(self, rng, spacing: float, extent: float = 256.0, origin: float = -96.0):
        self.spacing = spacing
        self.origin = origin
        n = int(math.ceil(extent / spacing)) + 2
        self.grid = rng.uniform(0, 1, (n, n))

    def __call__(self, x, y):
        gx = (x - self.origin) / self.spacing
        gy = (y - self.origin) / self.spacing
        n = self.grid.shape[0]
        gx = np.clip(gx, 0, n - 1.000001)
        gy = np.clip(gy, 0, n - 1.000001)
        x0, y0 = np.floor(gx).astype(int), np.floor(gy).astype(int)
        fx, fy = gx - x0, gy - y0
        fx = fx * fx * (3 - 2 * fx)
        fy = fy * fy * (3 - 2 * fy)
        g = self.grid
        top = g[y0, x0] * (1 - fx) + g[y0, x0 + 1] * fx
        bot = g[y0 + 1, x0] * (1 - fx) + g[y0 + 1, x0 + 1] * fx
        return top * (1 - fy) + bot * fy


@dataclass
class _WorldObject:
    cls: int
    x0: float
    y0: float
    x1: float
    y1: float
    phase: float

    def corners(self, shift=(0.0, 0.0)):
        dx, dy = shift
        return np.array([[self.x0 + dx, self.y0 + dy], [self.x1 + dx, self.y0 + dy],
                         [self.x1 + dx, self.y1 + dy], [self.x0 + dx, self.y1 + dy]])


def _object_pattern(cls: int, u, v, phase: float):
    """Class-specific texture in [0, 1] from object-local coords (u, v)."""
    k = cls % 6
    if k == 0:
        p = np.sin(2 * np.pi * v / 5.0 + phase)
    elif k == 1:
        p = np.sin(2 * np.pi * u / 5.0 + phase)
    elif k == 2:
        p = np.sign(np.sin(2 * np.pi * u / 6.0 + phase) * np.sin(2 * np.pi * v / 6.0))
    elif k == 3:
        p = np.cos(2 * np.pi * np.hypot(u - 8, v - 8) / 5.0 + phase)
    elif k == 4:
        p = np.sin(2 * np.pi * (u + v) / 6.0 + phase)
    else:
        p = np.sin(2 * np.pi * (u - v) / 6.0 + phase)
    return 0.5 + 0.5 * p


class _World:
    def __init__(self, rng, cfg: SceneConfig):
        self.layers = [_ValueNoise(rng, 4.0), _ValueNoise(rng, 9.0)]
        self.tint = rng.uniform(-0.06, 0.06, 3)
        self.objects: list[_WorldObject] = []
        self.velocity = np.zeros(2)

    def background(self, x, y):
        g = 0.55 * self.layers[0](x, y) + 0.45 * self.layers[1](x, y)
        g = 0.15 + 0.7 * g
        return np.clip(g[..., None] + self.tint, 0, 1)

    def object_masks(self, x, y, frame_offset: float):
        shift = self.velocity * frame_offset
        out = []
        for ob in self.objects:
            u, v = x - ob.x0 - shift[0], y - ob.y0 - shift[1]
            inside = (u >= 0) & (u < ob.x1 - ob.x0) & (v >= 0) & (v < ob.y1 - ob.y0)
            out.append((ob, inside, u, v))
        return out

    def render(self, G: np.ndarray, height: int, width: int, frame_offset: float,
               veil: float = 0.0) -> tuple[np.ndarray, list]:
        ys, xs = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
        w = apply_homography(np.linalg.inv(G), np.c_[xs.ravel(), ys.ravel()])
        wx, wy = w[:, 0].reshape(height, width), w[:, 1].reshape(height, width)
        img = self.background(wx, wy)
        supports = []
        for idx, (ob, inside, u, v) in enumerate(self.object_masks(wx, wy, frame_offset)):
            pat = _object_pattern(ob.cls, u, v, ob.phase)
            color = np.asarray(CLASS_COLORS[ob.cls])
            obj = color * (0.55 + 0.45 * pat[..., None])
            if idx == 0 and veil > 0:
                obj = (1 - veil) * obj + veil * img
            img = np.where(inside[..., None], obj, img)
            supports.append(inside)
        return img, supports


# ---------------------------------------------------------------- camera

def _step_motion(rng, cfg: SceneConfig, scale: float) -> np.ndarray:
    H, W = cfg.frame_size
    c = np.array([(W - 1) / 2.0, (H - 1) / 2.0])
    m = cfg.motion_scale * scale
    theta = math.radians(rng.uniform(-1, 1) * cfg.max_rotation_deg * m)
    zoom = 1.0 + rng.uniform(-1, 1) * cfg.max_zoom * m
    tx, ty = rng.uniform(-1, 1, 2) * cfg.max_translation * m
    px, py = rng.uniform(-1, 1, 2) * cfg.max_perspective * m
    A = np.array([[zoom * math.cos(theta), -zoom * math.sin(theta), tx],
                  [zoom * math.sin(theta), zoom * math.cos(theta), ty],
                  [px, py, 1.0]])
    Tc = np.array([[1, 0, c[0]], [0, 1, c[1]], [0, 0, 1.0]])
    Tc_inv = np.array([[1, 0, -c[0]], [0, 1, -c[1]], [0, 0, 1.0]])
    M = Tc @ A @ Tc_inv
    return M / M[2, 2]


def overlap_fraction(H: np.ndarray, height: int, width: int) -> float:
    """Fraction of target-frame pixels whose preimage under H lies in the source frame."""
    ys, xs = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    q = apply_homography(np.linalg.inv(H), np.c_[xs.ravel(), ys.ravel()])
    ok = (q[:, 0] >= 0) & (q[:, 0] <= width - 1) & (q[:, 1] >= 0) & (q[:, 1] <= height - 1)
    return float(ok.mean())


def _camera_path(rng, cfg: SceneConfig, max_retries: int = 6) -> list[np.ndarray]:
    """World->frame matrices G_k with the center frame at identity."""
    H, W = cfg.frame_size
    c = cfg.center_index
    scale = 1.0
    for _ in range(max_retries):
        steps = [_step_motion(rng, cfg, scale) for _ in range(cfg.T - 1)]
        G = [None] * cfg.T
        G[c] = np.eye(3)
        for k in range(c + 1, cfg.T):
            G[k] = steps[k - 1] @ G[k - 1]
        for k in range(c - 1, -1, -1):
            G[k] = np.linalg.inv(steps[k]) @ G[k + 1]
        G = [g / g[2, 2] for g in G]
        if all(overlap_fraction(G[k + 1] @ np.linalg.inv(G[k]), H, W) >= cfg.min_overlap
               for k in range(cfg.T - 1)):
            return G
        scale *= 0.7
    raise GenerationError(f"camera motion kept violating min_overlap={cfg.min_overlap}")


# ---------------------------------------------------------------- audio

def _quantize_audio(x: np.ndarray) -> np.ndarray:
    return np.clip(np.round(x * 32767.0), -32767, 32767).astype(np.int16)


def _to_waveform(q: np.ndarray, rate: int) -> Waveform:
    return Waveform(q.astype(np.float32) / np.float32(32767.0), rate)


def _int16_sum(a: Waveform, b: Waveform) -> Waveform:
    qa = np.round(np.asarray(a.samples, dtype=np.float64) * 32767.0).astype(np.int32)
    qb = np.round(np.asarray(b.samples, dtype=np.float64) * 32767.0).astype(np.int32)
    return _to_waveform(np.clip(qa + qb, -32767, 32767).astype(np.int16), a.sample_rate)


def _tone(rng, freq: float, n: int, rate: int, amplitude: float, jitter: float) -> np.ndarray:
    t = np.arange(n) / rate
    f = freq * (1 + rng.uniform(-jitter, jitter))
    am_rate = rng.uniform(2.0, 6.0)
    env = 0.6 + 0.4 * np.sin(2 * np.pi * am_rate * t + rng.uniform(0, 2 * np.pi))
    return amplitude * env * np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))


def _class_sound(rng, label: int, n: int, rate: int, amplitude: float, jitter: float) -> np.ndarray:
    """Harmonic family of class `label`: overtones at 1/h amplitude, unit RMS peak scaled."""
    t = np.arange(n) / rate
    f0 = CLASS_TONES[label] * (1 + rng.uniform(-jitter, jitter))
    n_harm = max(1, int(HARMONIC_CEILING // f0))
    h = np.arange(1, n_harm + 1)
    phases = rng.uniform(0, 2 * np.pi, n_harm)
    wave = (np.sin(2 * np.pi * f0 * h[:, None] * t + phases[:, None]) / h[:, None]).sum(0)
    wave /= np.sqrt(np.sum(0.5 / h ** 2))  # unit RMS before the envelope
    env = 0.6 + 0.4 * np.sin(2 * np.pi * CLASS_AM_RATES[label] * t + rng.uniform(0, 2 * np.pi))
    return amplitude * np.sqrt(0.5) * env * wave


# ---------------------------------------------------------------- clips

def _place_objects(rng, cfg: SceneConfig, label: int) -> list[_WorldObject]:
    H, W = cfg.frame_size
    others = [k for k in range(cfg.n_classes) if k != label]
    classes = [label] + list(rng.permutation(others)[: cfg.n_silent_objects])
    placed: list[_WorldObject] = []
    margin = 2
    for cls in classes:
        for _ in range(200):
            w, h = rng.integers(cfg.object_size[0], cfg.object_size[1] + 1, 2)
            x0 = rng.uniform(margin, W - margin - w)
            y0 = rng.uniform(margin, H - margin - h)
            cand = _WorldObject(int(cls), x0, y0, x0 + w, y0 + h, rng.uniform(0, 2 * np.pi))
            if all(cand.x1 + 2 <= p.x0 or p.x1 + 2 <= cand.x0 or cand.y1 + 2 <= p.y0
                   or p.y1 + 2 <= cand.y0 for p in placed):
                placed.append(cand)
                break
        else:
            raise GenerationError("could not place non-overlapping objects")
    return placed


def _box_from_quad(quad: np.ndarray, height: int, width: int, label: str):
    x_min = max(0, int(math.ceil(quad[:, 0].min())))
    y_min = max(0, int(math.ceil(quad[:, 1].min())))
    x_max = min(width, int(math.floor(quad[:, 0].max())) + 1)
    y_max = min(height, int(math.floor(quad[:, 1].max())) + 1)
    if x_min >= x_max or y_min >= y_max:
        return None
    return BoundingBox(x_min, y_min, x_max, y_max, label)


def clip_id(seed: int) -> str:
    return f"clip{seed:08d}"


def gen_clip(seed: int, cfg: SceneConfig = SceneConfig()) -> ClipRecord:
    rng, world, label, G = _scene(seed, cfg)
    Hf, Wf = cfg.frame_size
    c = cfg.center_index
    veils = np.where(rng.uniform(size=cfg.T) < cfg.occlusion_prob, cfg.occlusion_strength, 0.0)

    frames, boxes, silent_boxes = [], [], []
    for k in range(cfg.T):
        offset = (k - c) * cfg.frame_interval
        img, _ = world.render(G[k], Hf, Wf, offset, veils[k])
        frames.append(np.round(img * 255.0).astype(np.float32) / np.float32(255.0))
        shift = world.velocity * offset
        per_frame = []
        for ob in world.objects:
            quad = apply_homography(G[k], ob.corners(shift))
            per_frame.append(_box_from_quad(quad, Hf, Wf, CLASS_NAMES[ob.cls]))
        boxes.append([per_frame[0]] if per_frame[0] is not None else [])
        silent_boxes.append([b for b in per_frame[1:] if b is not None])

    T = cfg.T
    Hji = np.empty((T, T, 3, 3))
    for j in range(T):
        for i in range(T):
            m = G[i] @ np.linalg.inv(G[j])
            Hji[j, i] = np.eye(3) if i == j else m / m[2, 2]

    n = cfg.n_samples
    silent = bool(rng.uniform() < cfg.silent_prob)
    obj = _class_sound(rng, label, n, cfg.sample_rate, cfg.tone_amplitude, cfg.tone_jitter)
    if silent:
        obj = np.zeros(n)
    obj = obj + rng.normal(0, cfg.noise_level, n)
    dfreq = DISTRACTOR_TONES[int(rng.integers(len(DISTRACTOR_TONES)))]
    damp = cfg.tone_amplitude * 10 ** (-cfg.distractor_snr_db / 20.0)
    dist = _tone(rng, dfreq, n, cfg.sample_rate, damp, cfg.tone_jitter)
    distractor_on = bool(rng.uniform() < cfg.distractor_prob)
    q_obj, q_dist = _quantize_audio(obj), _quantize_audio(dist)
    q_mix = np.clip(q_obj.astype(np.int32) + (q_dist.astype(np.int32) if distractor_on else 0),
                    -32767, 32767).astype(np.int16)

    start = 15 - c * cfg.frame_interval
    return ClipRecord(
        video_id=clip_id(seed),
        frames=np.stack(frames),
        waveform=_to_waveform(q_mix, cfg.sample_rate),
        sources={"object": _to_waveform(q_obj, cfg.sample_rate),
                 "distractor": _to_waveform(q_dist, cfg.sample_rate)},
        gt_homographies=Hji,
        gt_boxes=boxes,
        label=CLASS_NAMES[label],
        distractor_on=distractor_on,
        silent=silent,
        frame_indices=tuple(start + k * cfg.frame_interval for k in range(T)),
        center_index=c,
        fps=cfg.fps,
        seed=seed,
        config=cfg.to_dict(),
        silent_boxes=silent_boxes,
    )


def _scene(seed: int, cfg: SceneConfig):
    rng = seed_rng(seed)
    world = _World(seed_rng(seed + cfg.texture_seed_offset), cfg)
    label = int(rng.integers(cfg.n_classes))
    world.objects = _place_objects(rng, cfg, label)
    direction = rng.uniform(0, 2 * np.pi)
    world.velocity = cfg.object_velocity * np.array([math.cos(direction), math.sin(direction)])
    G = _camera_path(rng, cfg)
    return rng, world, label, G


def object_support(clip: ClipRecord, k: int) -> np.ndarray:
    """Boolean mask of frame k pixels covered by the sounding object (re-rendered)."""
    cfg = SceneConfig(**clip.config)
    _, world, _, G = _scene(clip.seed, cfg)
    _, supports = world.render(G[k], *cfg.frame_size, (k - cfg.center_index) * cfg.frame_interval)
    return supports[0]


# ---------------------------------------------------------------- disk layout

def split_of(seeds: list[int], fractions=(0.8, 0.1, 0.1)) -> dict:
    """Deterministic split: order clips by a hash of their seed, then cut by fraction."""
    order = sorted(seeds, key=lambda s: hashlib.sha256(str(s).encode()).hexdigest())
    n = len(order)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    return {"train": [clip_id(s) for s in order[:n_train]],
            "val": [clip_id(s) for s in order[n_train:n_train + n_val]],
            "test": [clip_id(s) for s in order[n_train + n_val:]]}


def _write_wav(path: Path, w: Waveform):
    q = np.round(np.asarray(w.samples, dtype=np.float64) * 32767.0).astype(np.int16)
    wavfile.write(path, int(w.sample_rate), q)


def read_wav(path: Path) -> Waveform:
    rate, q = wavfile.read(path)
    if q.dtype != np.int16 or q.ndim != 1:
        raise ValueError(f"{path}: expected mono 16-bit PCM")
    return _to_waveform(q, rate)


def _file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_clip(clip: ClipRecord, directory: Path):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    try:
        for k, f in enumerate(clip.frames):
            Image.fromarray(np.round(f * 255.0).astype(np.uint8)).save(d / f"frame_{k:02d}.png")
        _write_wav(d / "audio.wav", clip.waveform)
        for name, w in clip.sources.items():
            _write_wav(d / f"source_{name}.wav", w)
        meta = {
            "video_id": clip.video_id,
            "label": clip.label,
            "distractor_on": clip.distractor_on,
            "silent": clip.silent,
            "frame_indices": list(clip.frame_indices),
            "center_index": clip.center_index,
            "fps": clip.fps,
            "seed": clip.seed,
            "config": clip.config,
            "gt_homographies": clip.gt_homographies.tolist(),
            "gt_boxes": [[b.to_dict() for b in fb] for fb in clip.gt_boxes],
            "silent_boxes": [[b.to_dict() for b in fb] for fb in clip.silent_boxes],
        }
        (d / "gt.json").write_text(json.dumps(meta, indent=1))
    except OSError as e:
        raise OSError(f"failed writing clip {clip.video_id} to {d}: {e}") from e


def read_clip(directory: Path) -> ClipRecord:
    d = Path(directory)
    try:
        meta = json.loads((d / "gt.json").read_text())
        T = len(meta["frame_indices"])
        frames = np.stack([np.asarray(Image.open(d / f"frame_{k:02d}.png").convert("RGB"),
                                      dtype=np.float32) / np.float32(255.0) for k in range(T)])
        waveform = read_wav(d / "audio.wav")
        sources = {name: read_wav(d / f"source_{name}.wav") for name in ("object", "distractor")
                   if (d / f"source_{name}.wav").exists()}
    except (OSError, KeyError, ValueError) as e:
        raise OSError(f"failed reading clip from {d}: {e}") from e
    return ClipRecord(
        video_id=meta["video_id"],
        frames=frames,
        waveform=waveform,
        sources=sources,
        gt_homographies=np.array(meta["gt_homographies"], dtype=np.float64),
        gt_boxes=[[BoundingBox.from_dict(b) for b in fb] for fb in meta["gt_boxes"]],
        label=meta["label"],
        distractor_on=meta["distractor_on"],
        silent=meta["silent"],
        frame_indices=tuple(meta["frame_indices"]),
        center_index=meta["center_index"],
        fps=meta["fps"],
        seed=meta["seed"],
        config=meta["config"],
        silent_boxes=[[BoundingBox.from_dict(b) for b in fb] for fb in meta.get("silent_boxes", [])],
    )


def write_dataset(clips: list[ClipRecord], directory) -> dict:
    """Write clips, ground-truth records and a split manifest; returns the manifest."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    gt_lines = []
    for clip in clips:
        rel = Path("clips") / clip.video_id
        write_clip(clip, root / rel)
        files = sorted((root / rel).iterdir())
        entries.append({"video_id": clip.video_id, "path": rel.as_posix(), "seed": clip.seed,
                        "files": {f.name: _file_digest(f) for f in files}})
        for k, fb in enumerate(clip.gt_boxes):
            gt_lines.append(json.dumps({"video_id": clip.video_id, "frame_index": k,
                                        "boxes": [b.to_dict() for b in fb],
                                        "out_of_view": clip.distractor_on}))
    (root / "ground_truth.jsonl").write_text("".join(line + "\n" for line in gt_lines))
    manifest = {"clips": entries, "splits": split_of([c.seed for c in clips])}
    manifest["hash"] = hashlib.sha256(
        json.dumps({"clips": entries, "splits": manifest["splits"]}, sort_keys=True).encode()
    ).hexdigest()
    (root / "manifest.json").write_text(json.dumps(manifest, indent=1))
    return manifest


def load_manifest(directory) -> dict:
    path = Path(directory) / "manifest.json"
    if not path.exists():
        raise FileNotFoundError(f"no dataset manifest at {path}")
    return json.loads(path.read_text())


def clip_seeds(base_seed: int, n: int) -> list[int]:
    return [base_seed * 10_000 + k for k in range(n)]


def generate_dataset(n_clips: int, base_seed: int, cfg: SceneConfig, directory) -> dict:
    clips = [gen_clip(s, cfg) for s in clip_seeds(base_seed, n_clips)]
    return write_dataset(clips, directory)
