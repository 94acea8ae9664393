"""
The light attenuation prior as a depth cue
==========================================

Red attenuates faster than green and blue, so ``max(B, G) - R`` grows with
range. On gray surfaces spread over many distances it tracks depth closely.
"""

import numpy as np

from uwdepth import uwsim
from uwdepth.photoloss import correlation_loss, pearson, ulap

water = uwsim.water_preset("coastal")
frames = uwsim.render_sequence(uwsim.ulap_scene(160, 120, 3), water)

for i, f in enumerate(frames):
    u = ulap(f.image)
    r = pearson(f.depth.values[f.depth.valid], u.values[f.depth.valid])
    print(f"frame {i}: pearson {r:.3f}, correlation loss {correlation_loss(f.depth, u):.3f}")

# Binned view of the relationship.
f = frames[0]
d, u = f.depth.values.ravel(), ulap(f.image).values.ravel()
edges = np.quantile(d, np.linspace(0, 1, 6))
for lo, hi in zip(edges[:-1], edges[1:]):
    sel = (d >= lo) & (d <= hi)
    print(f"depth {lo:5.2f}-{hi:5.2f} m: mean prior {u[sel].mean():+.3f}")

# The clear preset still removes red first, so the cue survives there too.
clear = uwsim.render_sequence(uwsim.ulap_scene(160, 120, 1), uwsim.water_preset("clear"))[0]
u_clear = ulap(clear.image).values
print("clear water pearson:", round(pearson(clear.depth.values.ravel(), u_clear.ravel()), 3))
