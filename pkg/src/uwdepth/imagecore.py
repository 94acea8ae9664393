"""Image and depth buffers, YUV conversion, PNG and PFM file I/O.

Images are plain float64 arrays of shape ``(H, W, C)`` with ``C`` in {1, 3},
channel order R, G, B and nominal range [0, 1]. Depth maps carry an explicit
validity mask next to the range values.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from uwdepth.errors import InputError

# BT.601 full-range, chroma centered on zero.
_RGB_TO_YUV = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.299 / 1.772, -0.587 / 1.772, 0.886 / 1.772],
        [0.701 / 1.402, -0.587 / 1.402, -0.114 / 1.402],
    ]
)
_YUV_TO_RGB = np.linalg.inv(_RGB_TO_YUV)


def as_image(data) -> np.ndarray:
    """Validate ``data`` as an image and return it as float64 ``(H, W, C)``.

    A 2-D array is treated as a single-channel image.
    """
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise InputError(f"expected an (H, W) or (H, W, 1|3) image, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InputError(f"image must be at least 1x1, got shape {arr.shape}")
    return arr


def luma(img) -> np.ndarray:
    """Single-channel ``(H, W)`` intensity: BT.601 luma for RGB, the channel itself otherwise."""
    img = as_image(img)
    if img.shape[2] == 1:
        return img[:, :, 0]
    return img @ _RGB_TO_YUV[0]


@dataclass(frozen=True)
class DepthMap:
    """Per-pixel range in meters (or disparity in 1/m) with a validity flag.

    Invalid pixels may hold any value; consumers must honour ``valid``.
    """

    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        valid = np.asarray(self.valid, dtype=bool)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise InputError(f"depth must be a non-empty 2-D grid, got shape {values.shape}")
        if valid.shape != values.shape:
            raise InputError(f"validity mask shape {valid.shape} != depth shape {values.shape}")
        # A valid pixel is always finite and strictly positive.
        valid = valid & np.isfinite(values) & (values > 0)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid", valid)

    @classmethod
    def from_array(cls, values) -> "DepthMap":
        """Wrap a raw grid; non-finite and non-positive entries become invalid."""
        values = np.asarray(values, dtype=np.float64)
        with np.errstate(invalid="ignore"):
            valid = np.isfinite(values) & (values > 0)
        return cls(values, valid)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def filled(self, fill: float = np.nan) -> np.ndarray:
        """Copy of the values with invalid pixels replaced by ``fill``."""
        return np.where(self.valid, self.values, fill)


@dataclass(frozen=True)
class YuvImage:
    y: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        if not (self.y.shape == self.u.shape == self.v.shape):
            raise InputError("y, u and v planes must share one shape")


def rgb_to_yuv(img) -> YuvImage:
    """Split an RGB image into BT.601 full-range luma and centered chroma planes."""
    img = as_image(img)
    if img.shape[2] != 3:
        raise InputError("rgb_to_yuv needs a 3-channel image")
    yuv = img @ _RGB_TO_YUV.T
    return YuvImage(yuv[:, :, 0], yuv[:, :, 1], yuv[:, :, 2])


def yuv_to_rgb(yuv: YuvImage) -> np.ndarray:
    stacked = np.stack([yuv.y, yuv.u, yuv.v], axis=-1)
    return stacked @ _YUV_TO_RGB.T


# ---------------------------------------------------------------- PNG


def load_image(path) -> np.ndarray:
    """Read an 8- or 16-bit PNG into a float RGB (or single-channel) image in [0, 1]."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"no such image file: {path}")
    raw = cv2.imread(os.fspath(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise InputError(f"could not decode image: {path}")
    if raw.dtype == np.uint8:
        scale = 255.0
    elif raw.dtype == np.uint16:
        scale = 65535.0
    else:
        raise InputError(f"unsupported bit depth {raw.dtype} in {path}")
    if raw.ndim == 2:
        raw = raw[:, :, None]
    elif raw.shape[2] == 4:
        raw = cv2.cvtColor(raw, cv2.COLOR_BGRA2RGB)
    elif raw.shape[2] == 3:
        raw = cv2.cvtColor(raw, cv2.COLOR_BGR2RGB)
    else:
        raise InputError(f"unsupported channel count {raw.shape[2]} in {path}")
    return raw.astype(np.float64) / scale


def save_image(img, path, bit_depth: int = 8) -> None:
    """Clamp to [0, 1], quantize to ``bit_depth`` bits and write a PNG."""
    img = as_image(img)
    if bit_depth == 8:
        top, dtype = 255.0, np.uint8
    elif bit_depth == 16:
        top, dtype = 65535.0, np.uint16
    else:
        raise InputError(f"bit_depth must be 8 or 16, got {bit_depth}")
    q = np.rint(np.clip(img, 0.0, 1.0) * top).astype(dtype)
    if q.shape[2] == 3:
        q = cv2.cvtColor(q, cv2.COLOR_RGB2BGR)
    else:
        q = q[:, :, 0]
    path = Path(path)
    if not cv2.imwrite(os.fspath(path), q):
        raise InputError(f"could not write image to {path}")


# ---------------------------------------------------------------- PFM

_PFM_DIMS = re.compile(rb"^\s*(\d+)\s+(\d+)\s*$")


def _pfm_readline(fh) -> bytes:
    line = fh.readline()
    if not line:
        raise InputError("truncated PFM header")
    return line.rstrip(b"\r\n")


def read_pfm(path) -> np.ndarray:
    """Read a single-channel PFM (``Pf``) into a top-down float64 grid."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"no such depth file: {path}")
    with open(path, "rb") as fh:
        magic = _pfm_readline(fh).strip()
        if magic == b"PF":
            raise InputError(f"{path}: 3-channel PFM is not a depth grid")
        if magic != b"Pf":
            raise InputError(f"{path}: bad PFM magic {magic!r}")
        dims = _PFM_DIMS.match(_pfm_readline(fh))
        if dims is None:
            raise InputError(f"{path}: malformed PFM dimension line")
        width, height = int(dims.group(1)), int(dims.group(2))
        try:
            scale = float(_pfm_readline(fh))
        except ValueError as exc:
            raise InputError(f"{path}: malformed PFM scale line") from exc
        if scale == 0 or width < 1 or height < 1:
            raise InputError(f"{path}: malformed PFM header")
        dtype = "<f4" if scale < 0 else ">f4"
        payload = fh.read()
    if len(payload) != width * height * 4:
        raise InputError(
            f"{path}: header declares {width}x{height} but payload holds {len(payload) // 4} floats"
        )
    grid = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    # PFM rows are stored bottom-up.
    return grid[::-1].astype(np.float64)


def write_pfm(path, grid) -> None:
    """Write a 2-D grid as little-endian single-channel PFM."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2:
        raise InputError(f"PFM grid must be 2-D, got shape {grid.shape}")
    height, width = grid.shape
    header = f"Pf\n{width} {height}\n-1.0\n".encode("ascii")
    body = np.ascontiguousarray(grid[::-1], dtype="<f4").tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(header + body)
    except OSError as exc:
        raise InputError(f"could not write {path}: {exc}") from exc


def load_depth(path) -> DepthMap:
    """Read a PFM depth (or disparity) grid; non-positive or non-finite cells are invalid."""
    return DepthMap.from_array(read_pfm(path))


def save_depth(depth: DepthMap, path) -> None:
    """Write ``depth`` as PFM, storing invalid pixels as 0 so they reload as invalid."""
    write_pfm(path, depth.filled(0.0))
