"""
Scoring depth predictions
=========================

Predictions from a monocular network are only defined up to scale, so they
are median-scaled before the standard error metrics. Open water is scored
separately: its predicted disparity should be zero.
"""

import numpy as np

from uwdepth.evalmetrics import bg_error, depth_metrics, disparity_from_depth, format_table, median_scale
from uwdepth.imagecore import DepthMap

rng = np.random.default_rng(0)
h, w = 60, 80
gt_vals = np.linspace(1.0, 12.0, w)[None, :].repeat(h, axis=0)
gt_vals[:15] = np.inf  # top rows see open water
gt = DepthMap.from_array(gt_vals)
background = ~gt.valid

rows = []
for name, pred_vals in [
    ("exact x3", 3.0 * gt.values),  # keeps infinite range in open water
    # these two report a finite 1 m-ish depth where there is only water
    ("noisy", gt.filled(1.0) * rng.lognormal(0, 0.1, (h, w))),
    ("biased far", gt.filled(1.0) ** 1.3),
]:
    pred = DepthMap.from_array(pred_vals)
    rep = depth_metrics(pred, gt)
    scaled, s = median_scale(pred, gt)
    bg = bg_error([disparity_from_depth(scaled)], [background])
    rows.append((name, type(rep)(**{**rep.as_dict(), "bg_error": bg})))
    print(f"{name}: median scale {s:.3f}")

print(format_table(rows))
