"""Image substrate: decoding, grayscale conversion, resizing, Gaussian filtering.

All pixel math is done here in plain numpy so the numeric behaviour is
fully specified: BT.601 luma conversion, pixel-center-aligned bilinear
resizing with edge clamping, and separable Gaussian blur with a kernel
truncated at radius ceil(4*sigma) and clamp-to-border edge handling.
Pillow is used only to decode PNG/JPEG byte streams.

Images are immutable values: every operation returns a new image and
never mutates its input, so they are safe to share across threads.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as _PILImage

from .errors import DecodeError, InvalidArgumentError

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
_JPEG_MAGIC = b"\xff\xd8\xff"


@dataclass(frozen=True)
class RgbImage:
    """Row-major (height, width, 3) uint8 image with channels in [0, 255]."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 3 or p.shape[2] != 3 or p.dtype != np.uint8:
            raise InvalidArgumentError("RgbImage requires a (h, w, 3) uint8 array")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise InvalidArgumentError("image dimensions must be at least 1x1")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class GrayImage:
    """Row-major (height, width) float64 luminance image with values in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 2 or p.dtype != np.float64:
            raise InvalidArgumentError("GrayImage requires a (h, w) float64 array")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise InvalidArgumentError("image dimensions must be at least 1x1")
        if p.min() < 0.0 or p.max() > 1.0:
            raise InvalidArgumentError("GrayImage values must lie in [0, 1]")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def decode_image(data: bytes, source: str = "<bytes>") -> RgbImage:
    """Decode a PNG or JPEG byte stream into an RgbImage.

    Other formats are rejected up front by magic-byte sniffing so that a
    stray file in a dataset directory fails with a clear message instead
    of whatever Pillow would make of it.
    """
    if not (data.startswith(_PNG_MAGIC) or data.startswith(_JPEG_MAGIC)):
        raise DecodeError(source, "not a PNG or JPEG stream")
    try:
        with _PILImage.open(io.BytesIO(data)) as im:
            rgb = im.convert("RGB")
            arr = np.asarray(rgb, dtype=np.uint8)
    except Exception as exc:
        raise DecodeError(source, str(exc)) from exc
    return RgbImage(pixels=arr)


def load_image(path: str | Path) -> RgbImage:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise DecodeError(path, str(exc)) from exc
    return decode_image(data, source=str(path))


def sniff_image_file(path: str | Path) -> bool:
    """Cheap decodability check: does the file start with a PNG/JPEG magic?"""
    try:
        with open(path, "rb") as fh:
            head = fh.read(8)
    except OSError:
        return False
    return head.startswith(_PNG_MAGIC) or head.startswith(_JPEG_MAGIC)


def to_grayscale(img: RgbImage) -> GrayImage:
    """BT.601 luma: (0.299 r + 0.587 g + 0.114 b) / 255, same dimensions."""
    p = img.pixels.astype(np.float64)
    gray = (0.299 * p[:, :, 0] + 0.587 * p[:, :, 1] + 0.114 * p[:, :, 2]) / 255.0
    return GrayImage(pixels=np.clip(gray, 0.0, 1.0))


def _source_coords(n_out: int, n_in: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # pixel-center alignment: out center x maps to (x + 0.5) * n_in / n_out - 0.5
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1.0)
    lo = np.floor(src).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    return lo, hi, frac


def resize_bilinear(img: GrayImage, new_w: int, new_h: int) -> GrayImage:
    """Bilinear resize with pixel-center alignment and edge clamping."""
    if new_w < 1 or new_h < 1:
        raise InvalidArgumentError(f"target dimensions must be >= 1, got {new_w}x{new_h}")
    p = img.pixels
    if (new_h, new_w) == p.shape:
        return GrayImage(pixels=p.copy())
    x_lo, x_hi, x_f = _source_coords(new_w, img.width)
    y_lo, y_hi, y_f = _source_coords(new_h, img.height)
    top = p[y_lo][:, x_lo] * (1.0 - x_f) + p[y_lo][:, x_hi] * x_f
    bot = p[y_hi][:, x_lo] * (1.0 - x_f) + p[y_hi][:, x_hi] * x_f
    out = top * (1.0 - y_f)[:, None] + bot * y_f[:, None]
    return GrayImage(pixels=np.clip(out, 0.0, 1.0))


def gaussian_kernel_1d(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian kernel truncated at radius ceil(4*sigma)."""
    if sigma <= 0.0:
        raise InvalidArgumentError(f"sigma must be positive, got {sigma}")
    radius = int(math.ceil(4.0 * sigma))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (xs / sigma) ** 2)
    return k / k.sum()


def _convolve_1d_axis(arr: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    radius = (len(kernel) - 1) // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (radius, radius)
    padded = np.pad(arr, pad, mode="edge")
    out = np.zeros_like(arr)
    n = arr.shape[axis]
    for i, w in enumerate(kernel):
        if axis == 0:
            out += w * padded[i:i + n, :]
        else:
            out += w * padded[:, i:i + n]
    return out


def blur_array(pixels: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur on a raw float array (no [0,1] revalidation).

    The scale-space code blurs difference-prone intermediates repeatedly;
    this raw-array entry point skips the GrayImage wrapper on hot paths.
    """
    kernel = gaussian_kernel_1d(sigma)
    tmp = _convolve_1d_axis(pixels, kernel, axis=0)
    return _convolve_1d_axis(tmp, kernel, axis=1)


def gaussian_blur(img: GrayImage, sigma: float) -> GrayImage:
    """Separable Gaussian blur; clamp-to-border edges, dimensions unchanged."""
    out = blur_array(img.pixels, sigma)
    return GrayImage(pixels=np.clip(out, 0.0, 1.0))
