"""Photometric reprojection loss, local-variation weighting and the ULAP
correlation prior.

Per-pixel quantities travel as :class:`LossMap` (values plus validity) so that
pixels the warp could not fill are excluded rather than penalised.
"""

from __future__ import annotations

import json
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.ndimage import uniform_filter

from uwdepth.errors import DegenerateError, InputError
from uwdepth.geometry import CameraIntrinsics, RigidPose, backproject, reproject, warp
from uwdepth.imagecore import DepthMap, as_image, luma

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2


@dataclass(frozen=True)
class LossConfig:
    """Weights and switches for :func:`total_loss`.

    ``alpha`` weights the L1 term against SSIM dissimilarity, ``lvw_window`` is
    the side of the local-variation window, ``corr_weight`` scales the ULAP
    correlation term. ``use_lvw=False`` replaces the variation weights with ones.
    """

    alpha: float = 0.1
    lvw_window: int = 25
    corr_weight: float = 1e-5
    use_min_composite: bool = True
    use_lvw: bool = True

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise InputError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.lvw_window < 3 or self.lvw_window % 2 == 0:
            raise InputError(f"lvw_window must be odd and >= 3, got {self.lvw_window}")
        if not self.corr_weight >= 0.0:
            raise InputError(f"corr_weight must be >= 0, got {self.corr_weight}")

    def with_(self, **changes) -> "LossConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "LossConfig":
        known = {f: d[f] for f in cls.__dataclass_fields__ if f in d}
        unknown = set(d) - set(known)
        if unknown:
            raise InputError(f"unknown loss config keys: {sorted(unknown)}")
        try:
            return cls(**known)
        except TypeError as exc:
            raise InputError(str(exc)) from exc

    @classmethod
    def from_file(cls, path) -> "LossConfig":
        """Load from a ``.json`` or ``.toml`` file; a ``[loss]`` table is used when present."""
        path = Path(path)
        try:
            if path.suffix.lower() == ".toml":
                d = tomllib.loads(path.read_text(encoding="utf-8"))
            else:
                d = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise InputError(f"cannot read config {path}: {exc}") from exc
        if isinstance(d.get("loss"), dict):
            d = d["loss"]
        return cls.from_dict(d)


@dataclass(frozen=True)
class LossMap:
    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        valid = np.asarray(self.valid, dtype=bool)
        if valid.shape != values.shape:
            raise InputError(f"mask shape {valid.shape} != map shape {values.shape}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid", valid & np.isfinite(values))

    @classmethod
    def full(cls, values) -> "LossMap":
        values = np.asarray(values, dtype=np.float64)
        return cls(values, np.ones(values.shape, dtype=bool))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def mean(self) -> float:
        if not self.valid.any():
            raise DegenerateError("loss map has no valid pixels")
        return float(self.values[self.valid].mean())


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a, b = as_image(a), as_image(b)
    if a.shape != b.shape:
        raise InputError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def l1_map(a, b) -> LossMap:
    a, b = _pair(a, b)
    return LossMap.full(np.abs(a - b).mean(axis=2))


def ssim_map(a, b) -> np.ndarray:
    """Per-pixel, per-channel SSIM from 3x3 box statistics with edge replication."""
    a, b = _pair(a, b)

    def box(x):
        return uniform_filter(x, size=(3, 3, 1), mode="nearest")

    mu_a, mu_b = box(a), box(b)
    var_a = box(a * a) - mu_a * mu_a
    var_b = box(b * b) - mu_b * mu_b
    cov = box(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + SSIM_C1) * (2 * cov + SSIM_C2)
    den = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return num / den


def ssim_dissimilarity_map(a, b) -> LossMap:
    """``(1 - SSIM) / 2`` averaged over channels, clipped to [0, 1]."""
    d = np.clip((1.0 - ssim_map(a, b)) / 2.0, 0.0, 1.0)
    return LossMap.full(d.mean(axis=2))


def reprojection_loss_map(target, warped, cfg: LossConfig, valid=None) -> LossMap:
    """``alpha * L1 + (1 - alpha) * SSIM-dissimilarity`` per pixel.

    ``valid`` is the warp mask; pixels outside it are invalid in the result.
    """
    l1 = l1_map(target, warped).values
    dssim = ssim_dissimilarity_map(target, warped).values
    values = cfg.alpha * l1 + (1.0 - cfg.alpha) * dssim
    mask = np.ones(values.shape, dtype=bool) if valid is None else np.asarray(valid, dtype=bool)
    return LossMap(values, mask)


def _check_same_shape(maps: Sequence[LossMap]) -> None:
    shapes = {m.shape for m in maps}
    if len(shapes) != 1:
        raise InputError(f"loss maps have differing shapes: {sorted(shapes)}")


def min_composite(maps: Sequence[LossMap]) -> LossMap:
    """Per-pixel minimum over the maps valid at that pixel."""
    if not maps:
        raise InputError("min_composite needs at least one map")
    _check_same_shape(maps)
    stack = np.stack([np.where(m.valid, m.values, np.inf) for m in maps])
    valid = np.logical_or.reduce([m.valid for m in maps])
    values = np.where(valid, stack.min(axis=0), 0.0)
    return LossMap(values, valid)


def mean_composite(maps: Sequence[LossMap]) -> LossMap:
    """Per-pixel mean over the maps valid at that pixel."""
    if not maps:
        raise InputError("mean_composite needs at least one map")
    _check_same_shape(maps)
    valid = np.stack([m.valid for m in maps])
    total = np.where(valid, np.stack([m.values for m in maps]), 0.0).sum(axis=0)
    count = valid.sum(axis=0)
    return LossMap(np.where(count > 0, total / np.maximum(count, 1), 0.0), count > 0)


def local_variation(img, k: int) -> LossMap:
    """Local variance ``E[x^2] - E[x]^2`` over a ``k x k`` window of the luma.

    Borders replicate the edge pixels.
    """
    x = luma(img)
    if k < 1 or k % 2 == 0:
        raise InputError(f"window size must be odd, got {k}")
    if k > min(x.shape):
        raise InputError(f"window {k} exceeds image size {x.shape}")
    # Centering first keeps a constant image at exactly zero and improves conditioning.
    x = x - np.median(x)
    mean = uniform_filter(x, size=k, mode="nearest")
    mean_sq = uniform_filter(x * x, size=k, mode="nearest")
    return LossMap.full(np.maximum(mean_sq - mean * mean, 0.0))


def normalize_lvw(sigma: LossMap) -> LossMap:
    """Rescale valid entries to [0, 1] by the global min and max (all zeros if flat)."""
    if not sigma.valid.any():
        raise DegenerateError("cannot normalize a map with no valid pixels")
    vals = sigma.values[sigma.valid]
    lo, hi = vals.min(), vals.max()
    if hi == lo:
        out = np.zeros(sigma.shape)
    else:
        out = np.where(sigma.valid, (sigma.values - lo) / (hi - lo), 0.0)
    return LossMap(out, sigma.valid)


def lvw_weighted_loss(loss: LossMap, weights: LossMap) -> LossMap:
    if loss.shape != weights.shape:
        raise InputError(f"loss shape {loss.shape} != weight shape {weights.shape}")
    w = weights.values[weights.valid]
    if w.size and (w.min() < 0.0 or w.max() > 1.0):
        raise InputError("weights must lie in [0, 1]")
    return LossMap(loss.values * weights.values, loss.valid & weights.valid)


def lvw_mask(img, k: int) -> LossMap:
    """Normalized local-variation weights for ``img``."""
    return normalize_lvw(local_variation(img, k))


def ulap(img) -> LossMap:
    """Underwater light attenuation prior ``max(B, G) - R`` per pixel."""
    img = as_image(img)
    if img.shape[2] != 3:
        raise InputError("ULAP needs an RGB image")
    return LossMap.full(np.maximum(img[:, :, 2], img[:, :, 1]) - img[:, :, 0])


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    """Pearson correlation of two equal-length samples; raises on zero variance."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size != y.size:
        raise InputError("samples differ in length")
    if x.size < 2:
        raise DegenerateError("Pearson correlation needs at least 2 samples")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateError("Pearson correlation undefined for a constant sample")
    return float(np.clip((dx @ dy) / np.sqrt(sxx * syy), -1.0, 1.0))


def correlation_loss(depth: DepthMap | LossMap, prior: LossMap) -> float:
    """``1 - Pearson(depth, prior)`` over jointly valid pixels, in [0, 2]."""
    if depth.shape != prior.shape:
        raise InputError(f"depth shape {depth.shape} != prior shape {prior.shape}")
    joint = depth.valid & prior.valid
    return 1.0 - pearson(depth.values[joint], prior.values[joint])


@dataclass(frozen=True)
class LossResult:
    total: float
    reprojection: float
    correlation: float | None
    composite: LossMap
    weights: LossMap


def total_loss(
    target,
    sources: Sequence,
    depth: DepthMap,
    poses: Sequence[RigidPose],
    K: CameraIntrinsics,
    cfg: LossConfig = LossConfig(),
) -> LossResult:
    """Full self-supervised objective for one target frame.

    ``poses[i]`` maps target-camera points into the camera of ``sources[i]``.
    Pixels with invalid depth drop out of the reprojection term.
    """
    target = as_image(target)
    if not sources:
        raise InputError("total_loss needs at least one source frame")
    if len(sources) != len(poses):
        raise InputError(f"{len(sources)} sources but {len(poses)} poses")
    if depth.shape != target.shape[:2]:
        raise InputError(f"depth shape {depth.shape} != image shape {target.shape[:2]}")

    if cfg.use_lvw:
        weights = lvw_mask(target, cfg.lvw_window)
    else:
        weights = LossMap.full(np.ones(depth.shape))

    points = backproject(depth, K, strict=False)
    maps = []
    for src, T in zip(sources, poses):
        warped, mask = warp(src, reproject(points, T, K))
        per_pixel = reprojection_loss_map(target, warped, cfg, mask & depth.valid)
        maps.append(lvw_weighted_loss(per_pixel, weights))
    composite = min_composite(maps) if cfg.use_min_composite else mean_composite(maps)
    reproj = composite.mean()

    corr = None
    total = reproj
    if cfg.corr_weight > 0:
        corr = correlation_loss(depth, ulap(target))
        total = reproj + cfg.corr_weight * corr
    return LossResult(total, reproj, corr, composite, weights)
