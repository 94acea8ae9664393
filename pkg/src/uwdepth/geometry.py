"""Pinhole camera, rigid transforms and the inverse-warp used by the reprojection loss.

Conventions: camera frame is x right, y down, z forward. Pixel ``(u, v)``
is the point ``(u, v)`` exactly, with no half-pixel offset. A pose file stores
a camera-to-world matrix; the transform that carries target-camera points into
a source camera is ``invert(source_c2w) @ target_c2w`` (see :func:`relative_pose`).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from uwdepth.errors import InputError
from uwdepth.imagecore import DepthMap, as_image

NEAR_CLIP = 1e-6  # meters
# Projected coordinates this close to an integer are snapped onto the lattice,
# so an identity warp samples exactly at pixel centers.
LATTICE_SNAP = 1e-9


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int | None = None
    height: int | None = None

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise InputError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def to_dict(self) -> dict:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraIntrinsics":
        try:
            return cls(
                float(d["fx"]),
                float(d["fy"]),
                float(d["cx"]),
                float(d["cy"]),
                None if d.get("width") is None else int(d["width"]),
                None if d.get("height") is None else int(d["height"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"bad intrinsics record: {exc}") from exc


@dataclass(frozen=True)
class RigidPose:
    """Rotation + translation acting as ``x -> R @ x + t``."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(-1)
        if R.shape != (3, 3) or t.shape != (3,):
            raise InputError("pose needs a 3x3 rotation and a 3-vector translation")
        if not np.all(np.isfinite(R)) or not np.all(np.isfinite(t)):
            raise InputError("pose contains non-finite entries")
        if np.abs(R.T @ R - np.eye(3)).max() > 1e-6 or abs(np.linalg.det(R) - 1.0) > 1e-6:
            raise InputError("rotation is not orthonormal with det +1")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidPose":
        return cls()

    @classmethod
    def from_matrix(cls, m) -> "RigidPose":
        m = np.asarray(m, dtype=np.float64)
        if m.shape != (4, 4):
            raise InputError(f"pose matrix must be 4x4, got {m.shape}")
        if np.abs(m[3] - [0, 0, 0, 1]).max() > 1e-9:
            raise InputError("pose matrix bottom row must be [0, 0, 0, 1]")
        return cls(m[:3, :3], m[:3, 3])

    @property
    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform points stored along the last axis."""
        return points @ self.rotation.T + self.translation


def compose(a: RigidPose, b: RigidPose) -> RigidPose:
    """Pose equivalent to applying ``b`` first, then ``a``."""
    return RigidPose(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def invert(a: RigidPose) -> RigidPose:
    Rt = a.rotation.T
    return RigidPose(Rt, -Rt @ a.translation)


def relative_pose(target_c2w: RigidPose, source_c2w: RigidPose) -> RigidPose:
    """Transform from the target camera frame into the source camera frame."""
    return compose(invert(source_c2w), target_c2w)


def rotation_about(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix for ``angle`` radians about ``axis``."""
    k = np.asarray(axis, dtype=np.float64)
    k = k / np.linalg.norm(k)
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * (K @ K)


@dataclass(frozen=True)
class PixelGrid:
    """Continuous sampling coordinates for every target pixel.

    ``u`` is the column and ``v`` the row coordinate in the source image.
    ``inside`` is true iff the point projected in front of the camera and
    both coordinates lie within ``[0, W-1] x [0, H-1]``.
    """

    u: np.ndarray
    v: np.ndarray
    inside: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.u.shape

    @classmethod
    def lattice(cls, height: int, width: int) -> "PixelGrid":
        v, u = np.mgrid[0:height, 0:width].astype(np.float64)
        return cls(u, v, np.ones((height, width), dtype=bool))


def backproject(depth: DepthMap, K: CameraIntrinsics, strict: bool = True) -> np.ndarray:
    """Lift every pixel to a 3-D point in the camera frame, shape ``(H, W, 3)``.

    With ``strict`` an invalid depth pixel raises; otherwise its point is NaN.
    """
    if strict and not depth.valid.all():
        raise InputError(f"{int((~depth.valid).sum())} pixels have invalid depth")
    H, W = depth.shape
    v, u = np.mgrid[0:H, 0:W].astype(np.float64)
    d = depth.filled(np.nan)
    return np.stack([d * (u - K.cx) / K.fx, d * (v - K.cy) / K.fy, d], axis=-1)


def _snap(x: np.ndarray) -> np.ndarray:
    r = np.rint(x)
    return np.where(np.abs(x - r) <= LATTICE_SNAP, r, x)


def project(points: np.ndarray, K: CameraIntrinsics, shape: tuple[int, int] | None = None) -> PixelGrid:
    """Perspective projection of camera-frame points.

    ``shape`` gives the ``(H, W)`` bounds for the inside flag; it defaults to
    the leading dimensions of ``points``.
    """
    points = np.asarray(points, dtype=np.float64)
    H, W = shape if shape is not None else points.shape[:2]
    X, Y, Z = points[..., 0], points[..., 1], points[..., 2]
    with np.errstate(invalid="ignore", divide="ignore"):
        front = np.isfinite(Z) & (Z > NEAR_CLIP)
        Zs = np.where(front, Z, 1.0)
        u = _snap(K.fx * X / Zs + K.cx)
        v = _snap(K.fy * Y / Zs + K.cy)
        u = np.where(front, u, np.nan)
        v = np.where(front, v, np.nan)
        inside = front & (u >= 0) & (u <= W - 1) & (v >= 0) & (v <= H - 1)
    return PixelGrid(u, v, inside)


def reproject(points: np.ndarray, T: RigidPose, K: CameraIntrinsics) -> PixelGrid:
    """Where each target point lands in a source view: ``K (R X + t)`` then perspective division."""
    return project(T.apply(points), K)


def warp(source, grid: PixelGrid) -> tuple[np.ndarray, np.ndarray]:
    """Bilinearly sample ``source`` at ``grid``.

    Returns the warped image and a boolean mask; pixels whose sample falls
    outside the source are zero with mask false.
    """
    source = as_image(source)
    H, W = source.shape[:2]
    if grid.shape != (H, W):
        raise InputError(f"grid shape {grid.shape} does not match source {(H, W)}")
    mask = grid.inside.copy()
    u = np.where(mask, grid.u, 0.0)
    v = np.where(mask, grid.v, 0.0)
    x0 = np.clip(np.floor(u).astype(np.intp), 0, max(W - 2, 0))
    y0 = np.clip(np.floor(v).astype(np.intp), 0, max(H - 2, 0))
    x1 = np.minimum(x0 + 1, W - 1)
    y1 = np.minimum(y0 + 1, H - 1)
    ax = (u - x0)[..., None]
    ay = (v - y0)[..., None]
    out = (
        (1 - ax) * (1 - ay) * source[y0, x0]
        + ax * (1 - ay) * source[y0, x1]
        + (1 - ax) * ay * source[y1, x0]
        + ax * ay * source[y1, x1]
    )
    out[~mask] = 0.0
    return out, mask


# ---------------------------------------------------------------- JSON files


def load_intrinsics(path) -> CameraIntrinsics:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read intrinsics {path}: {exc}") from exc
    return CameraIntrinsics.from_dict(d)


def save_intrinsics(K: CameraIntrinsics, path) -> None:
    Path(path).write_text(json.dumps(K.to_dict(), indent=2) + "\n", encoding="utf-8")


def load_pose(path) -> RigidPose:
    """Read a camera-to-world pose stored as a 4x4 row-major JSON matrix."""
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read pose {path}: {exc}") from exc
    if isinstance(d, dict):
        d = d.get("c2w", d.get("matrix"))
    try:
        return RigidPose.from_matrix(np.asarray(d, dtype=np.float64))
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad pose matrix in {path}: {exc}") from exc


def save_pose(pose: RigidPose, path) -> None:
    rows = [[float(x) for x in row] for row in pose.matrix]
    Path(path).write_text(json.dumps({"c2w": rows}, indent=2) + "\n", encoding="utf-8")
