"""Batch runs behind each CLI subcommand.

Every command is deterministic for fixed inputs and seeds. Frame-level work
may run on a thread pool but results are always reduced in frame order.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from uwdepth import evalmetrics, homaug, photoloss, uwsim
from uwdepth.cli.manifest import FrameRecord, SequenceManifest
from uwdepth.errors import DegenerateError, InputError
from uwdepth.geometry import relative_pose, save_intrinsics, save_pose
from uwdepth.imagecore import load_depth, load_image, save_depth, save_image, write_pfm

CSV_SCHEMA_VERSION = 1

log = logging.getLogger("uwdepth")


def _pmap(fn: Callable, items: Iterable, jobs: int = 1) -> list:
    items = list(items)
    if jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else v


@dataclass
class ExperimentResult:
    """A table of results plus the configuration that produced it."""

    kind: str
    columns: list[str]
    rows: list[list]
    config: dict = field(default_factory=dict)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# uwdepth {self.kind} v{CSV_SCHEMA_VERSION} config={json.dumps(self.config, sort_keys=True)}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(v) for v in r])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")

    def write_svg(self, path, x: str, y: str) -> None:
        Path(path).write_text(line_chart_svg(self.column(x), self.column(y), x, y), encoding="utf-8")


def line_chart_svg(xs: Sequence[float], ys: Sequence[float], xlabel: str, ylabel: str) -> str:
    """A bare-bones SVG polyline chart with axis labels and extrema ticks."""
    w, h, m = 480, 320, 50
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    sx = (w - 2 * m) / ((x1 - x0) or 1.0)
    sy = (h - 2 * m) / ((y1 - y0) or 1.0)
    pts = " ".join(f"{m + (x - x0) * sx:.2f},{h - m - (y - y0) * sy:.2f}" for x, y in zip(xs, ys))
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">\n'
        f'<rect width="{w}" height="{h}" fill="white"/>\n'
        f'<line x1="{m}" y1="{h - m}" x2="{w - m}" y2="{h - m}" stroke="black"/>\n'
        f'<line x1="{m}" y1="{m}" x2="{m}" y2="{h - m}" stroke="black"/>\n'
        f'<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="2"/>\n'
        f'<text x="{w / 2}" y="{h - 10}" text-anchor="middle">{xlabel}</text>\n'
        f'<text x="15" y="{h / 2}" transform="rotate(-90 15 {h / 2})" text-anchor="middle">{ylabel}</text>\n'
        f'<text x="{m}" y="{h - m + 15}" text-anchor="middle">{x0:g}</text>\n'
        f'<text x="{w - m}" y="{h - m + 15}" text-anchor="middle">{x1:g}</text>\n'
        f'<text x="{m - 5}" y="{h - m}" text-anchor="end">{y0:.3g}</text>\n'
        f'<text x="{m - 5}" y="{m}" text-anchor="end">{y1:.3g}</text>\n'
        "</svg>\n"
    )


# ---------------------------------------------------------------- synth


def cmd_synth(scene, out_dir, seed: int | None = None, jobs: int = 1) -> SequenceManifest:
    """Render a scene description and write frames, depths, poses, masks and a manifest.

    ``scene`` is a path to a JSON description or an already-parsed dict.
    """
    cfg = uwsim.parse_scene(scene) if isinstance(scene, dict) else uwsim.load_scene(scene)
    seed = cfg.seed if seed is None else seed
    out = Path(out_dir)
    (out / "bg").mkdir(parents=True, exist_ok=True)
    frames = uwsim.render_sequence(cfg.scene, cfg.water, cfg.noise_std, seed, jobs)

    save_intrinsics(cfg.scene.intrinsics, out / "intrinsics.json")
    records = []
    for i, fr in enumerate(frames):
        name = f"frame_{i:04d}"
        save_image(fr.image, out / f"{name}.png")
        save_depth(fr.depth, out / f"depth_{i:04d}.pfm")
        save_pose(fr.pose, out / f"pose_{i:04d}.json")
        save_image(uwsim.background_region(fr.depth).astype(float), out / "bg" / f"{name}.png")
        records.append(
            FrameRecord(
                out / f"{name}.png",
                out / f"depth_{i:04d}.pfm",
                out / f"pose_{i:04d}.json",
                round(i / cfg.fps, 9),
            )
        )
    preset = cfg.raw.get("water") if isinstance(cfg.raw.get("water"), str) else None
    manifest = SequenceManifest(tuple(records), out / "intrinsics.json", preset, out)
    manifest.save(out / "manifest.json")
    return manifest


# ---------------------------------------------------------------- losses


def _frame_loss(manifest: SequenceManifest, target: int, sources: Sequence[int], cfg, K, depth=None):
    tgt_pose = manifest.pose(target)
    src_imgs = [manifest.image(s) for s in sources]
    poses = [relative_pose(tgt_pose, manifest.pose(s)) for s in sources]
    depth = manifest.depth(target) if depth is None else depth
    return photoloss.total_loss(manifest.image(target), src_imgs, depth, poses, K, cfg)


def neighbors(manifest: SequenceManifest, index: int) -> list[int]:
    """Immediately preceding and following frames that carry a pose."""
    out = [j for j in (index - 1, index + 1) if 0 <= j < len(manifest) and manifest.frames[j].pose]
    if not out:
        raise InputError(f"frame {index} has no neighbor with a pose")
    return out


def _normalized(values: np.ndarray, valid: np.ndarray) -> np.ndarray:
    top = values[valid].max() if valid.any() else 0.0
    return np.where(valid, values / top, 0.0) if top > 0 else np.zeros_like(values)


def cmd_loss(
    manifest: SequenceManifest,
    index: int,
    cfg: photoloss.LossConfig,
    out_dir=None,
    depth_path=None,
) -> photoloss.LossResult:
    """Total loss for one frame against its neighbors.

    With ``out_dir``, writes the per-pixel loss (PNG scaled to its max, and raw
    PFM) and the LVW mask.
    """
    if not 0 <= index < len(manifest):
        raise InputError(f"frame index {index} outside 0..{len(manifest) - 1}")
    depth = load_depth(depth_path) if depth_path else None
    res = _frame_loss(manifest, index, neighbors(manifest, index), cfg, manifest.intrinsics(), depth)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        comp = res.composite
        save_image(_normalized(comp.values, comp.valid), out / f"loss_map_{index:04d}.png")
        write_pfm(out / f"loss_map_{index:04d}.pfm", np.where(comp.valid, comp.values, 0.0))
        save_image(res.weights.values, out / f"lvw_mask_{index:04d}.png")
        result = ExperimentResult(
            "loss",
            ["frame", "total", "reprojection", "correlation"],
            [[index, res.total, res.reprojection, res.correlation]],
            cfg.to_dict(),
        )
        result.write_csv(out / f"loss_{index:04d}.csv")
    return res


def cmd_frame_gap(
    manifest: SequenceManifest,
    max_gap: int,
    cfg: photoloss.LossConfig,
    jobs: int = 1,
) -> ExperimentResult:
    """Mean reprojection loss between frame ``i`` and frame ``i - gap``, for each gap.

    Uses the manifest's depth and poses; the correlation term is left out.
    """
    if max_gap < 1:
        raise InputError("max_gap must be >= 1")
    if len(manifest) <= max_gap:
        raise InputError(f"need more than {max_gap} frames, manifest has {len(manifest)}")
    cfg = cfg.with_(corr_weight=0.0)
    K = manifest.intrinsics()
    rows = []
    for gap in range(1, max_gap + 1):
        targets = range(gap, len(manifest))
        losses = _pmap(lambda i: _frame_loss(manifest, i, [i - gap], cfg, K).total, targets, jobs)
        rows.append([gap, float(np.mean(losses)), len(losses)])
    return ExperimentResult("frame-gap", ["gap", "mean_loss", "n"], rows, cfg.to_dict())


def cmd_alpha_sweep(
    manifest: SequenceManifest,
    alphas: Sequence[float],
    cfg: photoloss.LossConfig,
    jobs: int = 1,
) -> ExperimentResult:
    """Mean reprojection loss over all frames (each against its neighbors) per alpha."""
    if len(alphas) == 0:
        raise InputError("alpha list is empty")
    bad = [a for a in alphas if not 0.0 <= a <= 1.0]
    if bad:
        raise InputError(f"alpha values outside [0, 1]: {bad}")
    K = manifest.intrinsics()
    base = cfg.with_(corr_weight=0.0)
    rows = []
    for a in alphas:
        c = base.with_(alpha=float(a))
        losses = _pmap(lambda i: _frame_loss(manifest, i, neighbors(manifest, i), c, K).total, range(len(manifest)), jobs)
        rows.append([float(a), float(np.mean(losses)), len(losses)])
    return ExperimentResult("alpha-sweep", ["alpha", "mean_loss", "n"], rows, base.to_dict())


def cmd_ulap_corr(
    manifest: SequenceManifest,
    prior: str = "ulap",
    samples: int = 2000,
    seed: int = 0,
    scatter_path=None,
) -> ExperimentResult:
    """Pearson correlation between the ULAP prior and ground-truth depth.

    One row per frame, then a ``pooled`` row over all valid pixels. ``prior='depth'``
    swaps in the depth itself as a sanity check. ``scatter_path`` receives a
    seeded random sample of (depth, prior) pairs for plotting.
    """
    if prior not in ("ulap", "depth"):
        raise InputError(f"unknown prior {prior!r}")
    rows = []
    all_d, all_u = [], []
    for i in range(len(manifest)):
        depth = manifest.depth(i)
        if prior == "ulap":
            pm = photoloss.ulap(manifest.image(i))
            joint = depth.valid & pm.valid
            u = pm.values[joint]
        else:
            joint = depth.valid
            u = depth.values[joint]
        d = depth.values[joint]
        try:
            r = photoloss.pearson(d, u)
        except DegenerateError:
            r = math.nan
        rows.append([str(i), r, int(d.size)])
        all_d.append(d)
        all_u.append(u)
    d = np.concatenate(all_d)
    u = np.concatenate(all_u)
    rows.append(["pooled", photoloss.pearson(d, u), int(d.size)])
    if scatter_path is not None:
        rng = np.random.default_rng(seed)
        pick = np.sort(rng.choice(d.size, size=min(samples, d.size), replace=False))
        sc = ExperimentResult("ulap-scatter", ["depth", prior], [[float(a), float(b)] for a, b in zip(d[pick], u[pick])])
        sc.write_csv(scatter_path)
    return ExperimentResult("ulap-corr", ["frame", "pearson", "n"], rows, {"prior": prior})


# ---------------------------------------------------------------- augmentation


def parse_f0(text: str) -> float | None:
    """``'random'`` maps to None (draw from the seed), anything else to a cutoff."""
    if text == "random":
        return None
    try:
        f0 = float(text)
    except ValueError:
        raise InputError(f"--f0 must be a number or 'random', got {text!r}") from None
    if f0 < 0:
        raise InputError("--f0 must be >= 0")
    return f0


def augment_image(img, f0: float | None, seed) -> tuple[np.ndarray, float]:
    if f0 is None:
        return homaug.augment(img, seed)
    return homaug.homomorphic_filter(img, homaug.HomomorphicParams(f0)), f0


def cmd_augment_batch(manifest: SequenceManifest, out_dir, f0: float | None, seed: int, jobs: int = 1) -> ExperimentResult:
    """Filter every manifest image into ``out_dir`` under the same file name."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def work(i):
        img, used = augment_image(manifest.image(i), f0, [seed, i])
        name = manifest.frames[i].image.name
        save_image(img, out / name)
        return [name, used]

    rows = _pmap(work, range(len(manifest)), jobs)
    return ExperimentResult("augment", ["image", "f0"], rows, {"seed": seed, "f0": "random" if f0 is None else f0})


# ---------------------------------------------------------------- metrics


def cmd_metrics(
    pred_dir,
    manifest: SequenceManifest,
    bg_mask_dir=None,
    max_depth: float | None = None,
) -> list[tuple[str, evalmetrics.MetricReport]]:
    """Score predicted depth files against the manifest ground truth.

    The prediction for a frame is the PFM in ``pred_dir`` with the same file name
    as the frame's ground-truth depth. A background mask, if given, is the PNG in
    ``bg_mask_dir`` named like the frame image; nonzero marks open water.
    Returns per-frame rows followed by a ``mean`` row.
    """
    pred_dir = Path(pred_dir)
    rows = []
    for i, fr in enumerate(manifest.frames):
        if fr.depth is None:
            raise InputError(f"frame {i} has no ground-truth depth")
        pred_path = pred_dir / fr.depth.name
        if not pred_path.is_file():
            raise InputError(f"missing prediction {pred_path}")
        pred = load_depth(pred_path)
        gt = manifest.depth(i)
        if pred.shape != gt.shape:
            raise InputError(f"prediction {pred_path} has shape {pred.shape}, expected {gt.shape}")
        rep = evalmetrics.depth_metrics(pred, gt, max_depth)
        if bg_mask_dir is not None:
            mask = load_image(Path(bg_mask_dir) / fr.image.name)[:, :, 0] > 0.5
            if mask.shape != gt.shape:
                raise InputError(f"mask for frame {i} has shape {mask.shape}, expected {gt.shape}")
            if mask.any():
                scaled, _ = evalmetrics.median_scale(pred, gt)
                bg = evalmetrics.bg_error([evalmetrics.disparity_from_depth(scaled)], [mask])
                rep = evalmetrics.MetricReport(**{**rep.as_dict(), "bg_error": bg})
            else:
                log.debug("frame %d has no background pixels; bg_error left blank", i)
        rows.append((fr.image.stem, rep))
    rows.append(("mean", evalmetrics.mean_report([r for _, r in rows])))
    return rows
