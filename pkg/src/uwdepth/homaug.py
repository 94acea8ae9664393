"""Homomorphic-filter augmentation with a random Butterworth cutoff.

The filter works on the log of the luma plane in a DC-centered frequency
layout; chroma passes through untouched. No padding or windowing is applied,
so the FFT's periodic boundary can ring at image edges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from uwdepth.errors import InputError
from uwdepth.imagecore import YuvImage, as_image, rgb_to_yuv, yuv_to_rgb

LOG_EPS = 1e-6
F0_RANGE = (0.0, 250.0)
IMAG_TOL = 1e-8


@dataclass(frozen=True)
class HomomorphicParams:
    cutoff: float
    order: int = 2
    preserve_mean: bool = False

    def __post_init__(self):
        if not self.cutoff >= 0:
            raise InputError(f"cutoff must be >= 0, got {self.cutoff}")
        if int(self.order) != self.order or self.order < 1:
            raise InputError(f"order must be a positive integer, got {self.order}")


def butterworth_gain(distance, cutoff: float, order: int = 2):
    """High-pass Butterworth gain ``1 / (1 + (cutoff / distance)^(2 order))``.

    Zero cutoff passes everything; zero distance with positive cutoff is fully blocked.
    """
    distance = np.asarray(distance, dtype=np.float64)
    if cutoff == 0:
        return np.ones_like(distance)
    with np.errstate(divide="ignore"):
        ratio = cutoff / distance
    return 1.0 / (1.0 + ratio ** (2 * order))


def frequency_distance(height: int, width: int) -> np.ndarray:
    """Distance of each bin to the center of an ``fftshift``-ed spectrum."""
    z = np.arange(height) - height // 2
    w = np.arange(width) - width // 2
    return np.hypot(z[:, None], w[None, :])


def butterworth_highpass(height: int, width: int, cutoff: float, order: int = 2) -> np.ndarray:
    """Gain grid for a centered spectrum of size ``height x width``."""
    if cutoff < 0:
        raise InputError(f"cutoff must be >= 0, got {cutoff}")
    return butterworth_gain(frequency_distance(height, width), cutoff, order)


def filter_luma(y: np.ndarray, params: HomomorphicParams) -> np.ndarray:
    """High-pass ``log(y + eps)`` and exponentiate back; the result is not clamped.

    With ``preserve_mean`` the DC term of the log image is kept, so overall
    brightness survives; otherwise it is removed along with the other low
    frequencies below the cutoff.
    """
    y = np.asarray(y, dtype=np.float64)
    logy = np.log(np.maximum(y, 0.0) + LOG_EPS)
    H = butterworth_highpass(*y.shape, params.cutoff, params.order)
    if params.preserve_mean:
        H[y.shape[0] // 2, y.shape[1] // 2] = 1.0
    spec = np.fft.fftshift(np.fft.fft2(logy))
    back = np.fft.ifft2(np.fft.ifftshift(H * spec))
    residue = np.abs(back.imag).max()
    if residue > IMAG_TOL * max(1.0, np.abs(back.real).max()):
        raise FloatingPointError(f"inverse FFT left an imaginary residue of {residue:.3g}")
    return np.exp(back.real) - LOG_EPS


def filter_yuv(yuv: YuvImage, params: HomomorphicParams) -> YuvImage:
    """Filter the luma plane; the chroma arrays are passed through as-is."""
    return YuvImage(np.clip(filter_luma(yuv.y, params), 0.0, 1.0), yuv.u, yuv.v)


def homomorphic_filter(img, params: HomomorphicParams) -> np.ndarray:
    img = as_image(img)
    if img.shape[2] != 3:
        raise InputError("homomorphic_filter needs an RGB image")
    return np.clip(yuv_to_rgb(filter_yuv(rgb_to_yuv(img), params)), 0.0, 1.0)


def draw_cutoff(seed) -> float:
    """Uniform cutoff in [0, 250] from a generator seeded with ``seed``."""
    return float(np.random.default_rng(seed).uniform(*F0_RANGE))


def augment(img, seed, order: int = 2, preserve_mean: bool = False) -> tuple[np.ndarray, float]:
    """Filter ``img`` with a randomly drawn cutoff; returns the image and the cutoff used."""
    f0 = draw_cutoff(seed)
    return homomorphic_filter(img, HomomorphicParams(f0, order, preserve_mean)), f0
