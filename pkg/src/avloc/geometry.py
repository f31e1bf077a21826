"""Correspondences, robust homographies, feature warping and temporal aggregation.

Coordinates are (x right, y down) with pixel / cell centers at integer positions.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from scipy import ndimage

from .core import Homography, apply_homography, seed_rng


@dataclass(frozen=True)
class CorrespondenceSet:
    """Point pairs: src in frame j pixels, dst in frame i pixels."""

    src: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    dst: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    scores: np.ndarray = field(default_factory=lambda: np.zeros(0))
    source_frame: int = 0
    target_frame: int = 0

    def __post_init__(self):
        src = np.asarray(self.src, dtype=np.float64).reshape(-1, 2)
        dst = np.asarray(self.dst, dtype=np.float64).reshape(-1, 2)
        if len(src) != len(dst):
            raise ValueError("src and dst must have the same number of points")
        scores = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        if len(scores) != len(src):
            scores = np.ones(len(src))
        object.__setattr__(self, "src", src)
        object.__setattr__(self, "dst", dst)
        object.__setattr__(self, "scores", scores)

    def __len__(self):
        return len(self.src)


@dataclass(frozen=True)
class MatcherConfig:
    max_corners: int = 150
    harris_k: float = 0.04
    harris_sigma: float = 1.0
    nms_radius: int = 2
    min_response: float = 1e-3  # relative to the strongest corner
    patch_size: int = 8
    pre_blur: float = 0.6
    min_score: float = 0.6


@dataclass(frozen=True)
class RansacConfig:
    max_iterations: int = 2000
    inlier_threshold: float = 3.0
    min_inliers: int = 12
    confidence: float = 0.995
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations <= 0 or self.inlier_threshold <= 0 or self.min_inliers <= 0:
            raise ValueError("RANSAC parameters must be positive")
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must lie in (0, 1)")


# ---------------------------------------------------------------- matching

def to_gray(image) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 3:
        img = img @ np.array([0.299, 0.587, 0.114])
    return img


def harris_corners(gray: np.ndarray, cfg: MatcherConfig = MatcherConfig()) -> np.ndarray:
    """Sub-pixel Harris corners as an (N, 2) array of (x, y), strongest first."""
    gx = ndimage.sobel(gray, axis=1, mode="reflect")
    gy = ndimage.sobel(gray, axis=0, mode="reflect")
    sxx = ndimage.gaussian_filter(gx * gx, cfg.harris_sigma)
    syy = ndimage.gaussian_filter(gy * gy, cfg.harris_sigma)
    sxy = ndimage.gaussian_filter(gx * gy, cfg.harris_sigma)
    r = sxx * syy - sxy ** 2 - cfg.harris_k * (sxx + syy) ** 2
    peak = r.max()
    if peak <= 0:
        return np.zeros((0, 2))
    local_max = r == ndimage.maximum_filter(r, size=2 * cfg.nms_radius + 1)
    half = cfg.patch_size // 2 + 1
    border = np.zeros_like(local_max)
    border[half:-half, half:-half] = True
    ys, xs = np.nonzero(local_max & border & (r > cfg.min_response * peak))
    order = np.argsort(-r[ys, xs], kind="stable")[: cfg.max_corners]
    ys, xs = ys[order], xs[order]
    # quadratic peak refinement along each axis
    def offset(m, c, p):
        den = m - 2 * c + p
        return np.where(np.abs(den) > 1e-12, np.clip(0.5 * (m - p) / np.where(den == 0, 1, den), -0.5, 0.5), 0.0)
    dx = offset(r[ys, xs - 1], r[ys, xs], r[ys, xs + 1])
    dy = offset(r[ys - 1, xs], r[ys, xs], r[ys + 1, xs])
    return np.c_[xs + dx, ys + dy]


def patch_descriptors(gray: np.ndarray, points: np.ndarray, size: int = 8) -> np.ndarray:
    """Zero-mean, unit-norm intensity patches sampled bilinearly around each point."""
    if len(points) == 0:
        return np.zeros((0, size * size))
    offs = np.arange(size) - (size - 1) / 2.0
    oy, ox = np.meshgrid(offs, offs, indexing="ij")
    ys = points[:, 1, None] + oy.ravel()[None]
    xs = points[:, 0, None] + ox.ravel()[None]
    d = ndimage.map_coordinates(gray, [ys.ravel(), xs.ravel()], order=1, mode="nearest")
    d = d.reshape(len(points), -1)
    d = d - d.mean(axis=1, keepdims=True)
    norm = np.linalg.norm(d, axis=1, keepdims=True)
    return d / np.maximum(norm, 1e-12)


def match_features(image_j, image_i, cfg: MatcherConfig = MatcherConfig(),
                   source_frame: int = 0, target_frame: int = 0) -> CorrespondenceSet:
    """Harris corners + patch descriptors + mutual nearest neighbours."""
    gj, gi = to_gray(image_j), to_gray(image_i)
    if gj.shape != gi.shape:
        raise ValueError("images must share dimensions")
    empty = CorrespondenceSet(source_frame=source_frame, target_frame=target_frame)
    if cfg.pre_blur > 0:
        gj = ndimage.gaussian_filter(gj, cfg.pre_blur)
        gi = ndimage.gaussian_filter(gi, cfg.pre_blur)
    pj, pi = harris_corners(gj, cfg), harris_corners(gi, cfg)
    if len(pj) == 0 or len(pi) == 0:
        return empty
    dj = patch_descriptors(gj, pj, cfg.patch_size)
    di = patch_descriptors(gi, pi, cfg.patch_size)
    sim = dj @ di.T
    best_i = sim.argmax(axis=1)
    best_j = sim.argmax(axis=0)
    ks = np.nonzero(best_j[best_i] == np.arange(len(pj)))[0]
    scores = sim[ks, best_i[ks]]
    keep = scores >= cfg.min_score
    ks = ks[keep]
    return CorrespondenceSet(pj[ks], pi[best_i[ks]], scores[keep], source_frame, target_frame)


# ---------------------------------------------------------------- estimation

def hartley_normalize(points: np.ndarray):
    """Translate to zero centroid and scale to mean distance sqrt(2)."""
    c = points.mean(axis=0)
    d = np.linalg.norm(points - c, axis=1).mean()
    s = math.sqrt(2) / d if d > 1e-12 else 1.0
    T = np.array([[s, 0, -s * c[0]], [0, s, -s * c[1]], [0, 0, 1.0]])
    return (points - c) * s, T


def dlt_homography(src: np.ndarray, dst: np.ndarray) -> np.ndarray | None:
    """Normalized DLT fit of dst ~ H src over >= 4 correspondences."""
    if len(src) < 4:
        return None
    ns, Ts = hartley_normalize(src)
    nd, Td = hartley_normalize(dst)
    n = len(src)
    x, y = ns[:, 0], ns[:, 1]
    u, v = nd[:, 0], nd[:, 1]
    zero, one = np.zeros(n), np.ones(n)
    A = np.empty((2 * n, 9))
    A[0::2] = np.c_[x, y, one, zero, zero, zero, -u * x, -u * y, -u]
    A[1::2] = np.c_[zero, zero, zero, x, y, one, -v * x, -v * y, -v]
    _, sv, vt = np.linalg.svd(A)
    if len(sv) >= 8 and sv[7] < 1e-10 * max(sv[0], 1e-300):
        return None  # degenerate configuration (rank < 8)
    Hn = vt[-1].reshape(3, 3)
    H = np.linalg.inv(Td) @ Hn @ Ts
    if not np.all(np.isfinite(H)) or abs(H[2, 2]) < 1e-12:
        return None
    H = H / H[2, 2]
    if abs(np.linalg.det(H)) < 1e-10:
        return None
    return H


def transfer_error(H: np.ndarray, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    ph = np.c_[src, np.ones(len(src))] @ H.T
    w = ph[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        proj = ph[:, :2] / w[:, None]
        err = np.linalg.norm(proj - dst, axis=1)
    return np.where(np.isfinite(err) & (np.abs(w) > 1e-12), err, np.inf)


def _collinear(p: np.ndarray, tol: float = 1e-6) -> bool:
    scale = max(np.ptp(p[:, 0]), np.ptp(p[:, 1]), 1e-12) ** 2
    for a, b, c in ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)):
        u, w = p[b] - p[a], p[c] - p[a]
        if abs(u[0] * w[1] - u[1] * w[0]) < tol * scale:
            return True
    return False


def pair_seed(cfg: RansacConfig, source_frame: int, target_frame: int) -> int:
    return (cfg.seed * 1_000_003 + source_frame * 1009 + target_frame) & 0x7FFFFFFF


def estimate_homography(matches: CorrespondenceSet, cfg: RansacConfig = RansacConfig(),
                        seed: int | None = None) -> Homography:
    """RANSAC over 4-point samples with normalized-DLT hypotheses and an inlier refit.

    Never raises on degenerate input: returns the invalid (identity) homography.
    """
    j, i = matches.source_frame, matches.target_frame
    n = len(matches)
    if n < 4:
        return Homography.invalid(j, i)
    src, dst = matches.src, matches.dst
    rng = seed_rng(pair_seed(cfg, j, i) if seed is None else seed)
    best_inl, best_cost = None, np.inf
    needed, it = cfg.max_iterations, 0
    thr = cfg.inlier_threshold
    while it < min(cfg.max_iterations, needed):
        it += 1
        idx = rng.choice(n, size=4, replace=False)
        if _collinear(src[idx]) or _collinear(dst[idx]):
            continue
        H = dlt_homography(src[idx], dst[idx])
        if H is None:
            continue
        err = transfer_error(H, src, dst)
        inl = err < thr
        cost = np.minimum(err, thr).sum()  # MSAC-style tie breaking
        count = int(inl.sum())
        best_count = 0 if best_inl is None else int(best_inl.sum())
        if count > best_count or (count == best_count and cost < best_cost):
            best_inl, best_cost = inl, cost
            ratio = count / n
            p_fail = 1.0 - ratio ** 4
            if p_fail <= 1e-12:
                needed = it
            else:
                needed = min(cfg.max_iterations,
                             int(math.ceil(math.log(1 - cfg.confidence) / math.log(p_fail))))
    if best_inl is None or best_inl.sum() < 4:
        return Homography.invalid(j, i)
    # refit on all inliers until the inlier set stops changing
    H, inl = None, best_inl
    for _ in range(5):
        H_new = dlt_homography(src[inl], dst[inl])
        if H_new is None:
            break
        H = H_new
        new_inl = transfer_error(H, src, dst) < thr
        if new_inl.sum() < 4 or np.array_equal(new_inl, inl):
            inl = new_inl if new_inl.sum() >= 4 else inl
            break
        inl = new_inl
    count = int(inl.sum())
    if H is None or count < cfg.min_inliers:
        return Homography.invalid(j, i, inlier_count=count)
    return Homography(H, True, count, j, i)


def corner_reprojection_error(H_est, H_true, height: int, width: int) -> float:
    """Max distance between the two mappings of the frame's four corner pixels."""
    corners = np.array([[0, 0], [width - 1, 0], [width - 1, height - 1], [0, height - 1]], float)
    return float(np.linalg.norm(apply_homography(H_est, corners) - apply_homography(H_true, corners), axis=1).max())


def scale_homography(H: Homography, scale: float, offset: float = 0.0) -> Homography:
    """Re-express H in coordinates p' = scale * p + offset (conjugation by that map)."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    if not H.valid:
        return H
    if scale == 1 and offset == 0:
        return H
    A = np.array([[scale, 0, offset], [0, scale, offset], [0, 0, 1.0]])
    A_inv = np.array([[1 / scale, 0, -offset / scale], [0, 1 / scale, -offset / scale], [0, 0, 1.0]])
    M = A @ H.matrix @ A_inv
    return Homography(M / M[2, 2], True, H.inlier_count, H.source_frame, H.target_frame)


def feature_scale(downsample: int) -> tuple[float, float]:
    """(scale, offset) mapping pixel centers to feature-cell centers for stride D."""
    s = 1.0 / downsample
    return s, (s - 1.0) / 2.0


# ---------------------------------------------------------------- warping

def _is_passthrough(H: Homography) -> bool:
    return (not H.valid) or H.is_identity() or abs(np.linalg.det(H.matrix)) < 1e-10


def sampling_matrix(H: np.ndarray, height: int, width: int) -> np.ndarray:
    """Dense (hw, hw) bilinear inverse-mapping operator, zero outside the grid.

    Row p holds the weights with which output cell p reads input cells at
    q = H^-1 p.
    """
    Hinv = np.linalg.inv(np.asarray(H, dtype=np.float64))
    ys, xs = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    out_pts = np.c_[xs.ravel(), ys.ravel()].astype(np.float64)
    q = apply_homography(Hinv, out_pts)
    W = np.zeros((height * width, height * width))
    qx, qy = q[:, 0], q[:, 1]
    ok = np.isfinite(qx) & np.isfinite(qy)
    qx, qy = np.where(ok, qx, -10.0), np.where(ok, qy, -10.0)
    x0, y0 = np.floor(qx), np.floor(qy)
    fx, fy = qx - x0, qy - y0
    rows = np.arange(height * width)
    for dx, dy, wgt in ((0, 0, (1 - fx) * (1 - fy)), (1, 0, fx * (1 - fy)),
                        (0, 1, (1 - fx) * fy), (1, 1, fx * fy)):
        cx, cy = x0 + dx, y0 + dy
        inside = ok & (cx >= 0) & (cx < width) & (cy >= 0) & (cy < height) & (wgt > 0)
        cols = (cy * width + cx)[inside].astype(np.int64)
        np.add.at(W, (rows[inside], cols), wgt[inside])
    return W


def warp_grid(v, H_feat: Homography):
    """Warp a (..., c, h, w) grid into the target view by inverse bilinear sampling.

    Invalid, identity or singular homographies return the input unchanged.
    """
    if _is_passthrough(H_feat):
        return v
    h, w = v.shape[-2:]
    W = sampling_matrix(H_feat.matrix, h, w)
    if isinstance(v, torch.Tensor):
        Wt = torch.as_tensor(W, dtype=v.dtype, device=v.device)
        return (v.flatten(-2) @ Wt.T).unflatten(-1, (h, w))
    arr = np.asarray(v)
    return (arr.reshape(*arr.shape[:-2], h * w) @ W.T.astype(arr.dtype)).reshape(arr.shape)


def warp_image(image: np.ndarray, H: Homography) -> np.ndarray:
    """Warp an H x W (x C) image with the same convention as warp_grid."""
    img = np.asarray(image)
    if _is_passthrough(H):
        return img.copy()
    h, w = img.shape[:2]
    Hinv = np.linalg.inv(H.matrix)
    ys, xs = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    q = apply_homography(Hinv, np.c_[xs.ravel(), ys.ravel()])
    chans = img.reshape(h, w, -1)
    out = np.stack([
        ndimage.map_coordinates(chans[..., k].astype(np.float64), [q[:, 1], q[:, 0]],
                                order=1, mode="constant", cval=0.0)
        for k in range(chans.shape[-1])], axis=-1)
    return out.reshape(img.shape).astype(img.dtype)


def valid_region(H: Homography, height: int, width: int, margin: float = 0.0) -> np.ndarray:
    """Boolean mask of target cells whose preimage lies inside the source (with margin)."""
    if _is_passthrough(H):
        return np.ones((height, width), dtype=bool)
    ys, xs = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    q = apply_homography(np.linalg.inv(H.matrix), np.c_[xs.ravel(), ys.ravel()])
    ok = ((q[:, 0] >= margin) & (q[:, 0] <= width - 1 - margin)
          & (q[:, 1] >= margin) & (q[:, 1] <= height - 1 - margin))
    return ok.reshape(height, width)


# ---------------------------------------------------------------- aggregation

def aggregate_temporal(query: torch.Tensor, stack: torch.Tensor, d: int | None = None) -> torch.Tensor:
    """Per-location scaled dot-product attention over time with a residual.

    query: (..., c, h, w); stack: (..., T, c, h, w) already aligned to the query view.
    """
    if stack.shape[-4] == 0:
        raise ValueError("temporal stack is empty")
    if stack.shape[-3:] != query.shape[-3:]:
        raise ValueError(f"stack entries {tuple(stack.shape[-3:])} != query {tuple(query.shape[-3:])}")
    d = query.shape[-3] if d is None else d
    logits = (query.unsqueeze(-4) * stack).sum(dim=-3) / math.sqrt(d)  # (..., T, h, w)
    w = torch.softmax(logits, dim=-3)
    return query + (w.unsqueeze(-3) * stack).sum(dim=-4)


def warp_operators(homographies, height: int, width: int, dtype=torch.float32) -> torch.Tensor:
    """(T, T, hw, hw) tensor; entry [i, j] warps frame j's grid into view i.

    `homographies[j][i]` are feature-level Homography objects (j -> i).
    """
    T = len(homographies)
    eye = np.eye(height * width)
    ops = np.empty((T, T, height * width, height * width))
    for i in range(T):
        for j in range(T):
            H = homographies[j][i]
            ops[i, j] = eye if (i == j or _is_passthrough(H)) else sampling_matrix(H.matrix, height, width)
    return torch.as_tensor(ops, dtype=dtype)


def gatm(v_hat: torch.Tensor, operators: torch.Tensor | None) -> torch.Tensor:
    """Geometry-aware temporal modeling over a (..., T, c, h, w) stack.

    operators: (..., T, T, hw, hw) from warp_operators, or None for unaligned
    (identity) stacks.
    """
    *lead, T, c, h, w = v_hat.shape
    flat = v_hat.flatten(-2)  # (..., T, c, hw)
    if operators is None:
        aligned = flat.unsqueeze(-4).expand(*lead, T, T, c, h * w)
    else:
        # aligned[..., i, j] = op[..., i, j] @ v_j
        aligned = torch.einsum("...ijpq,...jcq->...ijcp", operators, flat)
    aligned = aligned.unflatten(-1, (h, w))  # (..., T_query, T_stack, c, h, w)
    return aggregate_temporal(v_hat, aligned, c)


def estimate_clip_homographies(frames, matcher: MatcherConfig = MatcherConfig(),
                               ransac: RansacConfig = RansacConfig()):
    """All-pairs H[j][i] (frame j -> frame i) at full image resolution."""
    T = len(frames)
    H = [[None] * T for _ in range(T)]
    for j in range(T):
        for i in range(T):
            if i == j:
                H[j][i] = Homography.identity(j, i)
            else:
                m = match_features(frames[j], frames[i], matcher, j, i)
                H[j][i] = estimate_homography(m, ransac)
    return H


class HomographyCache:
    """Record/replay store of homographies keyed by (video_id, j, i)."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._data: dict[str, dict] = {}
        if self.path.exists():
            self._data = json.loads(self.path.read_text())

    @staticmethod
    def key(video_id: str, j: int, i: int) -> str:
        return f"{video_id}|{j}|{i}"

    def get(self, video_id: str, j: int, i: int) -> Homography | None:
        rec = self._data.get(self.key(video_id, j, i))
        if rec is None:
            return None
        return Homography(np.array(rec["matrix"], dtype=np.float64), rec["valid"],
                          rec["inlier_count"], j, i)

    def put(self, video_id: str, H: Homography):
        self._data[self.key(video_id, H.source_frame, H.target_frame)] = {
            "matrix": H.matrix.tolist(), "valid": H.valid, "inlier_count": H.inlier_count}

    def save(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(self._data))
