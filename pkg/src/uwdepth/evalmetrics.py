"""Depth evaluation metrics (AbsRel, SqRel, RMSE, RMSElog, delta thresholds)
and the open-water background error."""

from __future__ import annotations

import csv
import io
from dataclasses import astuple, dataclass, fields
from typing import Sequence

import numpy as np

from uwdepth.errors import DegenerateError, InputError
from uwdepth.imagecore import DepthMap

DELTA_BASE = 1.25


@dataclass(frozen=True)
class MetricReport:
    """One row of the results table. Field order is the column order."""

    abs_rel: float
    sq_rel: float
    rmse: float
    rmse_log: float
    delta1: float
    delta2: float
    delta3: float
    bg_error: float | None = None
    pixel_count: int = 0

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> list:
        return ["" if v is None else v for v in astuple(self)]

    def as_dict(self) -> dict:
        return dict(zip(self.columns(), astuple(self)))


def median_scale(pred: DepthMap, gt: DepthMap) -> tuple[DepthMap, float]:
    """Scale ``pred`` so its median matches the ground truth over jointly valid pixels."""
    if pred.shape != gt.shape:
        raise InputError(f"prediction shape {pred.shape} != ground truth {gt.shape}")
    joint = pred.valid & gt.valid
    if not joint.any():
        raise DegenerateError("prediction and ground truth share no valid pixels")
    med_pred = np.median(pred.values[joint])
    if med_pred <= 0:
        raise DegenerateError("prediction median is zero")
    scale = float(np.median(gt.values[joint]) / med_pred)
    return DepthMap(pred.values * scale, pred.valid), scale


def _errors(p: np.ndarray, g: np.ndarray) -> tuple[float, ...]:
    if p.size == 0:
        raise DegenerateError("no pixels to evaluate")
    if (p <= 0).any() or (g <= 0).any():
        raise DegenerateError("non-positive depth reached a logarithm")
    diff = p - g
    ratio = np.maximum(p / g, g / p)
    return (
        float(np.mean(np.abs(diff) / g)),
        float(np.mean(diff**2 / g)),
        float(np.sqrt(np.mean(diff**2))),
        float(np.sqrt(np.mean((np.log(p) - np.log(g)) ** 2))),
        float(np.mean(ratio < DELTA_BASE)),
        float(np.mean(ratio < DELTA_BASE**2)),
        float(np.mean(ratio < DELTA_BASE**3)),
    )


def depth_metrics(
    pred: DepthMap,
    gt: DepthMap,
    max_depth: float | None = None,
    scale: bool = True,
) -> MetricReport:
    """Median-scale ``pred`` (unless ``scale=False``) and score it on jointly valid pixels.

    ``max_depth`` drops ground-truth pixels beyond that range.
    """
    if pred.shape != gt.shape:
        raise InputError(f"prediction shape {pred.shape} != ground truth {gt.shape}")
    if max_depth is not None:
        gt = DepthMap(gt.values, gt.valid & (gt.values <= max_depth))
    if scale:
        pred, _ = median_scale(pred, gt)
    joint = pred.valid & gt.valid
    values = _errors(pred.values[joint], gt.values[joint])
    return MetricReport(*values, pixel_count=int(joint.sum()))


def disparity_from_depth(depth: DepthMap) -> DepthMap:
    """Inverse depth; invalid pixels become disparity 0 (infinitely far)."""
    disp = np.where(depth.valid, 1.0 / np.where(depth.valid, depth.values, 1.0), 0.0)
    return DepthMap(disp, np.ones(depth.shape, dtype=bool))


def bg_error(disparities: Sequence, masks: Sequence) -> float:
    """Mean predicted disparity over each image's background, averaged over images.

    Disparities may be :class:`DepthMap` (invalid pixels count as 0) or arrays.
    """
    if len(disparities) != len(masks):
        raise InputError(f"{len(disparities)} disparity maps but {len(masks)} masks")
    if not disparities:
        raise InputError("bg_error needs at least one image")
    per_image = []
    for i, (disp, mask) in enumerate(zip(disparities, masks)):
        values = disp.filled(0.0) if isinstance(disp, DepthMap) else np.asarray(disp, dtype=np.float64)
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != values.shape:
            raise InputError(f"image {i}: mask shape {mask.shape} != disparity shape {values.shape}")
        if not mask.any():
            raise DegenerateError(f"image {i}: background mask is empty")
        per_image.append(values[mask].mean())
    return float(np.mean(per_image))


def mean_report(reports: Sequence[MetricReport]) -> MetricReport:
    """Unweighted mean of per-image reports; ``bg_error`` is averaged where present."""
    if not reports:
        raise InputError("no reports to aggregate")
    cols = MetricReport.columns()[:7]
    means = [float(np.mean([getattr(r, c) for r in reports])) for c in cols]
    bgs = [r.bg_error for r in reports if r.bg_error is not None]
    bg = float(np.mean(bgs)) if bgs else None
    return MetricReport(*means, bg_error=bg, pixel_count=sum(r.pixel_count for r in reports))


def format_table(rows: Sequence[tuple[str, MetricReport]]) -> str:
    """Fixed-width table with a leading label column."""
    cols = MetricReport.columns()
    out = io.StringIO()
    out.write(f"{'frame':>12} " + " ".join(f"{c:>10}" for c in cols) + "\n")
    for label, rep in rows:
        cells = []
        for v in rep.row():
            cells.append(f"{v:>10}" if isinstance(v, (int, str)) else f"{v:>10.4f}")
        out.write(f"{label:>12} " + " ".join(cells) + "\n")
    return out.getvalue()


def write_csv(fh, rows: Sequence[tuple[str, MetricReport]]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["frame", *MetricReport.columns()])
    for label, rep in rows:
        w.writerow([label, *(repr(v) if isinstance(v, float) else v for v in rep.row())])
