"""Underwater image formation and a ray-cast renderer of textured planes.

The renderer produces image sequences with exact depth and camera poses, so
every loss and prior in the package can be checked against known geometry.
Textures are sums of seeded sinusoids defined on each plane's own surface
coordinates: the same surface point has the same clear radiance from every
viewpoint, and any frame-to-frame difference comes from the medium.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from uwdepth.errors import InputError
from uwdepth.geometry import CameraIntrinsics, RigidPose, rotation_about
from uwdepth.imagecore import DepthMap, as_image


@dataclass(frozen=True)
class WaterProperties:
    """Per-channel (R, G, B) attenuation ``chi`` in 1/m and veiling light ``ambient``."""

    chi: tuple[float, float, float]
    ambient: tuple[float, float, float]

    def __post_init__(self):
        chi = tuple(float(c) for c in self.chi)
        amb = tuple(float(a) for a in self.ambient)
        if len(chi) != 3 or len(amb) != 3:
            raise InputError("water properties need three channels")
        if min(chi) < 0:
            raise InputError(f"attenuation must be non-negative, got {chi}")
        if min(amb) < 0 or max(amb) > 1:
            raise InputError(f"ambient light must lie in [0, 1], got {amb}")
        object.__setattr__(self, "chi", chi)
        object.__setattr__(self, "ambient", amb)


WATER_PRESETS = {
    "coastal": WaterProperties((0.40, 0.10, 0.07), (0.15, 0.35, 0.45)),
    "turbid": WaterProperties((0.60, 0.30, 0.35), (0.20, 0.40, 0.35)),
    "clear": WaterProperties((0.25, 0.05, 0.03), (0.05, 0.20, 0.35)),
    "vacuum": WaterProperties((0.0, 0.0, 0.0), (0.0, 0.0, 0.0)),
}
WATER_PRESETS["default"] = WATER_PRESETS["coastal"]


def water_preset(name: str) -> WaterProperties:
    try:
        return WATER_PRESETS[name]
    except KeyError:
        raise InputError(f"unknown water preset {name!r}; choose from {sorted(WATER_PRESETS)}") from None


def transmission(depth: DepthMap, chi) -> np.ndarray:
    """``exp(-chi * d)`` per channel, shape ``(H, W, C)``."""
    if not depth.valid.all():
        raise InputError("transmission needs valid depth at every pixel")
    chi = np.atleast_1d(np.asarray(chi, dtype=np.float64))
    return np.exp(-depth.values[:, :, None] * chi)


def apply_medium(J, depth: DepthMap, water: WaterProperties) -> np.ndarray:
    """Attenuate clear radiance ``J`` and add backscatter: ``J t + A (1 - t)``.

    Pixels with invalid depth are treated as open water at infinite range and
    take the veiling light ``A``.
    """
    J = as_image(J)
    if J.shape[2] != 3:
        raise InputError("apply_medium needs an RGB radiance image")
    if J.shape[:2] != depth.shape:
        raise InputError(f"radiance shape {J.shape[:2]} != depth shape {depth.shape}")
    A = np.asarray(water.ambient)
    d = depth.filled(0.0)[:, :, None]
    t = np.exp(-d * np.asarray(water.chi))
    t = np.where(depth.valid[:, :, None], t, 0.0)
    return J * t + A * (1.0 - t)


# ---------------------------------------------------------------- scene


@dataclass(frozen=True)
class Plane:
    """A textured plane through ``(0, 0, distance)`` in world coordinates.

    ``tilt_x`` and ``tilt_y`` (degrees) rotate the plane about the world x and
    y axes; zero tilt faces the initial camera. ``extent`` optionally bounds the
    plane in its own coordinates as ``(a_min, a_max, b_min, b_max)`` meters.
    ``albedo`` is the clear-radiance range of the texture and
    ``texture_scale`` the highest spatial frequency in cycles per meter.
    """

    distance: float
    tilt_x: float = 0.0
    tilt_y: float = 0.0
    texture_seed: int = 0
    albedo: tuple[float, float] = (0.15, 0.45)
    gray: bool = True
    texture_scale: float = 3.0
    extent: tuple[float, float, float, float] | None = None

    def __post_init__(self):
        lo, hi = self.albedo
        if not 0 <= lo <= hi <= 1:
            raise InputError(f"albedo range must satisfy 0 <= lo <= hi <= 1, got {self.albedo}")
        if self.texture_scale <= 0:
            raise InputError("texture_scale must be positive")

    @property
    def frame(self) -> np.ndarray:
        """Columns: in-plane axes a and b, then the unit normal."""
        return rotation_about([1, 0, 0], np.radians(self.tilt_x)) @ rotation_about(
            [0, 1, 0], np.radians(self.tilt_y)
        )

    @property
    def origin(self) -> np.ndarray:
        return np.array([0.0, 0.0, self.distance])

    def _waves(self):
        rng = np.random.default_rng(self.texture_seed)
        n = 12
        freq = rng.uniform(0.3, 1.0, n) * self.texture_scale
        theta = rng.uniform(0, np.pi, n)
        amp = rng.uniform(0.3, 1.0, n) / np.sqrt(np.arange(1, n + 1))
        phase = rng.uniform(0, 2 * np.pi, (n, 3) if not self.gray else (n, 1))
        tint = np.ones(3) if self.gray else rng.uniform(0.6, 1.0, 3)
        return freq, theta, amp, phase, tint

    def texture(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Clear radiance at plane coordinates ``(a, b)``, shape ``a.shape + (3,)``."""
        freq, theta, amp, phase, tint = self._waves()
        arg = 2 * np.pi * freq * (np.cos(theta) * a[..., None] + np.sin(theta) * b[..., None])
        chans = []
        # tanh keeps the sum bounded while leaving it smooth.
        spread = 2.0 * np.sqrt(0.5 * (amp**2).sum())
        for c in range(phase.shape[1]):
            chans.append(np.tanh((amp * np.sin(arg + phase[:, c])).sum(axis=-1) / spread))
        s = np.stack(chans, axis=-1)
        if s.shape[-1] == 1:
            s = np.repeat(s, 3, axis=-1)
        lo, hi = self.albedo
        return (lo + (hi - lo) * 0.5 * (1.0 + s)) * tint


@dataclass(frozen=True)
class Illumination:
    """Low-frequency multiplicative light field fixed to the camera (e.g. vehicle lamps).

    ``flicker`` adds a per-frame random modulation of the field strength.
    """

    strength: float = 0.3
    seed: int = 0
    flicker: float = 0.0

    def field(self, height: int, width: int, frame: int) -> np.ndarray:
        rng = np.random.default_rng([self.seed, 0])
        y, x = np.mgrid[0:height, 0:width]
        x = x / max(width - 1, 1)
        y = y / max(height - 1, 1)
        f = np.zeros((height, width))
        for _ in range(3):
            kx, ky = rng.uniform(0.2, 1.2, 2)
            ph = rng.uniform(0, 2 * np.pi)
            f += np.cos(2 * np.pi * (kx * x + ky * y) + ph)
        f /= 3.0
        gain = self.strength
        if self.flicker:
            gain *= 1.0 + self.flicker * np.random.default_rng([self.seed, 1, frame]).uniform(-1, 1)
        return np.clip(1.0 + gain * f, 0.0, None)


@dataclass(frozen=True)
class SyntheticScene:
    """Planes, a camera-to-world trajectory and intrinsics with image size."""

    planes: tuple[Plane, ...]
    trajectory: tuple[RigidPose, ...]
    intrinsics: CameraIntrinsics
    illumination: Illumination | None = None

    def __post_init__(self):
        if self.intrinsics.width is None or self.intrinsics.height is None:
            raise InputError("scene intrinsics must carry width and height")
        object.__setattr__(self, "planes", tuple(self.planes))
        object.__setattr__(self, "trajectory", tuple(self.trajectory))
        if not self.planes:
            raise InputError("scene needs at least one plane")
        for i, pose in enumerate(self.trajectory):
            for j, plane in enumerate(self.planes):
                n = plane.frame[:, 2]
                # Cameras must stay on the viewing side of every plane.
                if n @ (pose.translation - plane.origin) >= 0:
                    raise InputError(f"camera {i} is on or behind plane {j}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.intrinsics.height, self.intrinsics.width


@dataclass(frozen=True)
class RenderedFrame:
    image: np.ndarray
    depth: DepthMap
    pose: RigidPose
    clear_image: np.ndarray


def rasterize(scene: SyntheticScene, pose: RigidPose) -> tuple[np.ndarray, DepthMap]:
    """Ray-cast the planes from camera ``pose``; returns clear radiance and z-depth.

    Pixels that hit no plane get zero radiance and invalid depth.
    """
    K = scene.intrinsics
    H, W = scene.shape
    v, u = np.mgrid[0:H, 0:W].astype(np.float64)
    rays = np.stack([(u - K.cx) / K.fx, (v - K.cy) / K.fy, np.ones_like(u)], axis=-1)
    rays_w = rays @ pose.rotation.T
    center = pose.translation

    depth = np.full((H, W), np.inf)
    radiance = np.zeros((H, W, 3))
    for plane in scene.planes:
        frame = plane.frame
        n = frame[:, 2]
        denom = rays_w @ n
        with np.errstate(divide="ignore", invalid="ignore"):
            s = ((plane.origin - center) @ n) / denom
        hit = np.isfinite(s) & (s > 1e-6)
        rel = center + s[..., None] * rays_w - plane.origin
        a = rel @ frame[:, 0]
        b = rel @ frame[:, 1]
        if plane.extent is not None:
            a0, a1, b0, b1 = plane.extent
            hit &= (a >= a0) & (a <= a1) & (b >= b0) & (b <= b1)
        # Camera-frame depth equals the ray parameter since rays have unit z.
        closer = hit & (s < depth)
        if closer.any():
            depth[closer] = s[closer]
            radiance[closer] = plane.texture(a[closer], b[closer])
    return radiance, DepthMap.from_array(depth)


def render_frame(
    scene: SyntheticScene,
    water: WaterProperties,
    index: int,
    noise_std: float = 0.0,
    seed: int = 0,
) -> RenderedFrame:
    pose = scene.trajectory[index]
    clear, depth = rasterize(scene, pose)
    if scene.illumination is not None:
        H, W = scene.shape
        clear = np.clip(clear * scene.illumination.field(H, W, index)[..., None], 0.0, 1.0)
    image = apply_medium(clear, depth, water)
    if noise_std > 0:
        rng = np.random.default_rng([seed, index])
        image = image + rng.normal(0.0, noise_std, image.shape)
    return RenderedFrame(np.clip(image, 0.0, 1.0), depth, pose, clear)


def render_sequence(
    scene: SyntheticScene,
    water: WaterProperties,
    noise_std: float = 0.0,
    seed: int = 0,
    jobs: int = 1,
) -> list[RenderedFrame]:
    """Render every pose of the trajectory.

    Noise for frame ``i`` is drawn from a generator seeded by ``(seed, i)``,
    so results do not depend on ``jobs``.
    """
    if not scene.trajectory:
        raise InputError("trajectory is empty")
    if noise_std < 0:
        raise InputError("noise_std must be non-negative")
    idx = range(len(scene.trajectory))
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            return list(pool.map(lambda i: render_frame(scene, water, i, noise_std, seed), idx))
    return [render_frame(scene, water, i, noise_std, seed) for i in idx]


def background_region(depth: DepthMap, horizon: float | None = None) -> np.ndarray:
    """Open-water mask: pixels with no geometry, or farther than ``horizon`` meters."""
    mask = ~depth.valid
    if horizon is not None:
        mask |= depth.valid & (depth.values > horizon)
    return mask


# ---------------------------------------------------------------- trajectories


def linear_trajectory(
    n_frames: int,
    velocity=(0.0, 0.0, 0.0),
    yaw_rate: float = 0.0,
    start=(0.0, 0.0, 0.0),
) -> list[RigidPose]:
    """Constant-velocity camera-to-world poses; ``yaw_rate`` is degrees per frame about y."""
    if n_frames < 1:
        raise InputError("need at least one frame")
    start = np.asarray(start, dtype=np.float64)
    velocity = np.asarray(velocity, dtype=np.float64)
    return [
        RigidPose(rotation_about([0, 1, 0], np.radians(yaw_rate * i)), start + i * velocity)
        for i in range(n_frames)
    ]


def default_intrinsics(width: int, height: int, hfov_deg: float = 70.0) -> CameraIntrinsics:
    f = 0.5 * width / np.tan(np.radians(hfov_deg) / 2)
    return CameraIntrinsics(f, f, (width - 1) / 2, (height - 1) / 2, width, height)


# ---------------------------------------------------------------- scene files


@dataclass
class SceneConfig:
    """Parsed scene description file."""

    scene: SyntheticScene
    water: WaterProperties
    noise_std: float = 0.0
    seed: int = 0
    fps: float = 10.0
    raw: dict = field(default_factory=dict)


def _floats(value, n, name):
    try:
        out = tuple(float(x) for x in value)
    except TypeError:
        raise InputError(f"{name} must be a list of {n} numbers") from None
    if len(out) != n:
        raise InputError(f"{name} must have {n} entries")
    return out


def parse_scene(d: dict) -> SceneConfig:
    """Build a scene from its JSON description; schema violations raise :class:`InputError`."""
    if not isinstance(d, dict):
        raise InputError("scene config must be a JSON object")
    try:
        width, height = int(d["width"]), int(d["height"])
    except (KeyError, TypeError, ValueError):
        raise InputError("scene config needs integer width and height") from None
    if width < 1 or height < 1:
        raise InputError("width and height must be positive")

    if "intrinsics" in d:
        K = CameraIntrinsics.from_dict({**d["intrinsics"], "width": width, "height": height})
    else:
        K = default_intrinsics(width, height, float(d.get("hfov_deg", 70.0)))

    planes_raw = d.get("planes")
    if not isinstance(planes_raw, list) or not planes_raw:
        raise InputError("scene config needs a non-empty 'planes' list")
    planes = []
    allowed = set(Plane.__dataclass_fields__)
    for i, p in enumerate(planes_raw):
        if not isinstance(p, dict) or "distance" not in p:
            raise InputError(f"plane {i} needs a 'distance'")
        extra = set(p) - allowed
        if extra:
            raise InputError(f"plane {i} has unknown keys {sorted(extra)}")
        kw = dict(p)
        if "albedo" in kw:
            kw["albedo"] = _floats(kw["albedo"], 2, f"plane {i} albedo")
        if kw.get("extent") is not None:
            kw["extent"] = _floats(kw["extent"], 4, f"plane {i} extent")
        try:
            planes.append(Plane(**kw))
        except TypeError as exc:
            raise InputError(f"plane {i}: {exc}") from None

    traj = d.get("trajectory")
    if not isinstance(traj, dict):
        raise InputError("scene config needs a 'trajectory' object")
    if "poses" in traj:
        poses = [RigidPose.from_matrix(np.asarray(m, dtype=np.float64)) for m in traj["poses"]]
    else:
        try:
            n = int(traj["frames"])
        except (KeyError, TypeError, ValueError):
            raise InputError("trajectory needs 'frames' or explicit 'poses'") from None
        poses = linear_trajectory(
            n,
            _floats(traj.get("velocity", (0, 0, 0)), 3, "velocity"),
            float(traj.get("yaw_rate", 0.0)),
            _floats(traj.get("start", (0, 0, 0)), 3, "start"),
        )
    if not poses:
        raise InputError("trajectory is empty")

    water_raw = d.get("water", "default")
    if isinstance(water_raw, str):
        water = water_preset(water_raw)
    elif isinstance(water_raw, dict):
        water = WaterProperties(
            _floats(water_raw.get("chi"), 3, "water chi"), _floats(water_raw.get("A"), 3, "water A")
        )
    else:
        raise InputError("'water' must be a preset name or {chi, A}")

    illum = None
    if d.get("illumination") is not None:
        try:
            illum = Illumination(**d["illumination"])
        except TypeError as exc:
            raise InputError(f"illumination: {exc}") from None

    noise = float(d.get("noise_std", 0.0))
    if noise < 0:
        raise InputError("noise_std must be non-negative")
    scene = SyntheticScene(tuple(planes), tuple(poses), K, illum)
    return SceneConfig(scene, water, noise, int(d.get("seed", 0)), float(d.get("fps", 10.0)), d)


def load_scene(path) -> SceneConfig:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read scene config {path}: {exc}") from exc
    return parse_scene(d)


def frame_gap_scene(
    width: int = 320,
    height: int = 240,
    n_frames: int = 12,
    speed: float = 0.1,
) -> SyntheticScene:
    """A single tilted, colored wall approached by a camera gliding forward and sideways.

    No occlusions and no grazing angles, so in clear water the reprojection
    error with true depth and pose is only interpolation error.
    """
    return parse_scene(sequence_scene_dict(width, height, n_frames, speed)).scene


def ulap_scene(width: int = 160, height: int = 120, n_frames: int = 3) -> SyntheticScene:
    """Gray-textured planes spread over a wide range of distances."""
    K = default_intrinsics(width, height)
    planes = (
        Plane(distance=2.0, extent=(-3.0, -0.6, -5, 5), texture_seed=11, albedo=(0.2, 0.3)),
        Plane(distance=5.0, extent=(-0.8, 1.5, -5, 5), texture_seed=12, albedo=(0.2, 0.3)),
        Plane(distance=12.0, texture_seed=13, albedo=(0.2, 0.3)),
        Plane(distance=3.0, tilt_x=-75.0, texture_seed=14, albedo=(0.2, 0.3)),
    )
    traj = linear_trajectory(n_frames, (0.0, 0.0, 0.1))
    return SyntheticScene(planes, tuple(traj), K)


def sequence_scene_dict(
    width: int = 320, height: int = 240, n_frames: int = 12, speed: float = 0.1
) -> dict:
    """JSON scene description used by :func:`frame_gap_scene`."""
    return {
        "width": width,
        "height": height,
        "hfov_deg": 70.0,
        "planes": [
            {
                "distance": 4.0,
                "tilt_x": 15.0,
                "tilt_y": 30.0,
                "texture_seed": 1,
                "gray": False,
                "albedo": [0.1, 0.6],
            }
        ],
        "trajectory": {"frames": n_frames, "velocity": [0.4 * speed, 0.0, speed]},
        "water": "coastal",
        "noise_std": 0.0,
        "seed": 0,
    }
