"""
Homomorphic filtering as augmentation
=====================================

Work in the log of luma, where illumination multiplies into an additive low
frequency term, and remove it with a Butterworth high-pass. A random cutoff
per image gives a cheap illumination augmentation. Cutoff 0 is a no-op.
"""

from pathlib import Path

import numpy as np

from uwdepth import uwsim
from uwdepth.homaug import HomomorphicParams, augment, homomorphic_filter
from uwdepth.imagecore import luma, save_image

out = Path("demo_out/augment")
out.mkdir(parents=True, exist_ok=True)

scene = uwsim.frame_gap_scene(160, 120, 1)
scene = uwsim.SyntheticScene(
    scene.planes, scene.trajectory, scene.intrinsics, uwsim.Illumination(strength=0.6, seed=2)
)
img = uwsim.render_sequence(scene, uwsim.water_preset("coastal"))[0].image
save_image(img, out / "input.png")

for f0 in (0.0, 2.0, 10.0, 60.0):
    for keep in (False, True):
        res = homomorphic_filter(img, HomomorphicParams(f0, preserve_mean=keep))
        tag = "keep-mean" if keep else "literal"
        print(f"F0={f0:5.1f} {tag:>9}: luma mean {luma(res).mean():.3f} std {luma(res).std():.3f}")
        save_image(res, out / f"f0_{f0:g}_{tag}.png")

print("identity check:", np.abs(homomorphic_filter(img, HomomorphicParams(0.0)) - img).max())

for seed in range(3):
    _, f0 = augment(img, seed)
    print(f"seed {seed}: drew F0={f0:.1f}")
