"""Image primitives shared by training, evaluation, and LUT inference.

Conventions used everywhere in this package:

* an ``Image`` is an 8-bit raster with an explicit colorspace tag,
  stored as a ``(H, W, C)`` uint8 array (C is 1 or 3);
* a "plane" is a single channel as a ``(H, W)`` float64 array with
  values in [0, 1] (the working representation for the luma channel);
* quantization to the 0..255 domain always rounds half up, so the
  float and integer pipelines agree bit-for-bit at shared boundaries.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum

import numpy as np
from PIL import Image as PilImage

from .errors import DataError, EmptyImageError, UnsupportedImageError

__all__ = [
    "Colorspace",
    "Image",
    "load_png",
    "save_png",
    "rgb_to_ycbcr",
    "ycbcr_to_rgb",
    "bicubic_resize",
    "resize_image",
    "pad_replicate",
    "rotate90",
    "to_unit",
    "quantize_u8",
    "luma_plane",
]

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


class Colorspace(Enum):
    GRAY = "gray"
    RGB = "rgb"
    YCBCR = "ycbcr"


@dataclass(frozen=True)
class Image:
    """8-bit raster. ``data`` has shape (height, width, channels)."""

    colorspace: Colorspace
    data: np.ndarray

    def __post_init__(self):
        d = self.data
        if d.ndim != 3 or d.dtype != np.uint8:
            raise DataError(f"image data must be (H, W, C) uint8, got {d.shape} {d.dtype}")
        if d.shape[2] not in (1, 3):
            raise DataError(f"images carry 1 or 3 channels, got {d.shape[2]}")
        if d.shape[2] == 1 and self.colorspace is not Colorspace.GRAY:
            raise DataError("single-channel images must be tagged Gray")
        if d.shape[2] == 3 and self.colorspace is Colorspace.GRAY:
            raise DataError("Gray images must be single-channel")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


def _read_ihdr(path):
    """Return (bit_depth, color_type) from the PNG header, or raise."""
    try:
        with open(path, "rb") as fh:
            head = fh.read(len(_PNG_MAGIC) + 4 + 4 + 13)
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from exc
    if len(head) < 29 or not head.startswith(_PNG_MAGIC):
        raise DataError(f"{path}: not a PNG file")
    chunk_type = head[12:16]
    if chunk_type != b"IHDR":
        raise DataError(f"{path}: malformed PNG (missing IHDR)")
    _, _, bit_depth, color_type = struct.unpack(">IIBB", head[16:26])
    return bit_depth, color_type


def load_png(path) -> Image:
    """Decode an 8-bit grayscale or RGB PNG.

    Anything else (16-bit, palette, alpha) is rejected rather than
    silently converted, so evaluation inputs are exactly what is on disk.
    """
    bit_depth, color_type = _read_ihdr(path)
    if bit_depth != 8:
        raise UnsupportedImageError(f"{path}: unsupported bit depth {bit_depth} (want 8)")
    if color_type not in (0, 2):
        raise UnsupportedImageError(
            f"{path}: unsupported PNG color type {color_type} (want grayscale or RGB)"
        )
    try:
        with PilImage.open(path) as im:
            im.load()
            arr = np.asarray(im, dtype=np.uint8)
    except (OSError, SyntaxError) as exc:
        raise DataError(f"{path}: corrupt PNG stream ({exc})") from exc
    if arr.ndim == 2:
        return Image(Colorspace.GRAY, arr[:, :, None].copy())
    return Image(Colorspace.RGB, arr.copy())


def save_png(image: Image, path) -> None:
    """Write an Image to disk; round-trips through load_png bit-exactly."""
    if image.width == 0 or image.height == 0:
        raise EmptyImageError("cannot encode a zero-sized image")
    if image.colorspace is Colorspace.YCBCR:
        raise DataError("PNG output expects RGB or Gray; convert YCbCr first")
    if image.channels == 1:
        pil = PilImage.fromarray(image.data[:, :, 0], mode="L")
    else:
        pil = PilImage.fromarray(image.data, mode="RGB")
    pil.save(path, format="PNG")


# BT.601 full-range coefficients, the de facto convention for Y-channel
# super-resolution benchmarks.
_RGB2YCBCR = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.168736, -0.331264, 0.5],
        [0.5, -0.418688, -0.081312],
    ]
)
_YCBCR2RGB = np.array(
    [
        [1.0, 0.0, 1.402],
        [1.0, -0.344136, -0.714136],
        [1.0, 1.772, 0.0],
    ]
)


def _round_u8(x: np.ndarray) -> np.ndarray:
    """Round half up and clamp to the 8-bit range."""
    return np.clip(np.floor(x + 0.5), 0, 255).astype(np.uint8)


def rgb_to_ycbcr(image: Image) -> Image:
    """Full-range BT.601 RGB -> YCbCr, rounded to nearest level."""
    if image.colorspace is not Colorspace.RGB:
        raise DataError(f"rgb_to_ycbcr expects RGB, got {image.colorspace.value}")
    rgb = image.data.astype(np.float64)
    ycc = rgb @ _RGB2YCBCR.T
    ycc[:, :, 1:] += 128.0
    return Image(Colorspace.YCBCR, _round_u8(ycc))


def ycbcr_to_rgb(image: Image) -> Image:
    """Inverse full-range BT.601 YCbCr -> RGB, rounded to nearest level."""
    if image.colorspace is not Colorspace.YCBCR:
        raise DataError(f"ycbcr_to_rgb expects YCbCr, got {image.colorspace.value}")
    ycc = image.data.astype(np.float64)
    ycc = ycc - np.array([0.0, 128.0, 128.0])
    rgb = ycc @ _YCBCR2RGB.T
    return Image(Colorspace.RGB, _round_u8(rgb))


def to_unit(samples: np.ndarray) -> np.ndarray:
    """uint8 samples -> float64 plane in [0, 1]."""
    return samples.astype(np.float64) / 255.0


def quantize_u8(plane: np.ndarray) -> np.ndarray:
    """float plane in [0, 1] -> uint8, rounding half up."""
    return _round_u8(plane * 255.0)


def luma_plane(image: Image) -> np.ndarray:
    """Y channel of an image as a unit-range plane (Gray passes through)."""
    if image.colorspace is Colorspace.GRAY:
        return to_unit(image.data[:, :, 0])
    if image.colorspace is Colorspace.RGB:
        image = rgb_to_ycbcr(image)
    return to_unit(image.data[:, :, 0])


def _cubic_weights(frac: np.ndarray) -> np.ndarray:
    """Keys cubic-convolution weights (a = -0.5) for the 4 taps around x.

    ``frac`` is the fractional position in [0, 1); returns shape
    ``frac.shape + (4,)`` for taps at offsets -1, 0, +1, +2. The four
    weights sum to 1 for every phase, so constants resample exactly.
    """
    a = -0.5
    t = np.stack([frac + 1.0, frac, 1.0 - frac, 2.0 - frac], axis=-1)
    w = np.empty_like(t)
    inner = t <= 1.0
    ti = t[inner]
    w[inner] = (a + 2.0) * ti**3 - (a + 3.0) * ti**2 + 1.0
    to = t[~inner]
    w[~inner] = a * to**3 - 5.0 * a * to**2 + 8.0 * a * to - 4.0 * a
    return w


def _resample_axis(data: np.ndarray, out_len: int, axis: int) -> np.ndarray:
    in_len = data.shape[axis]
    scale = in_len / out_len
    # half-pixel center alignment
    x = (np.arange(out_len) + 0.5) * scale - 0.5
    base = np.floor(x).astype(np.int64)
    frac = x - base
    weights = _cubic_weights(frac)  # (out_len, 4)
    moved = np.moveaxis(data, axis, 0)
    acc = np.zeros((out_len,) + moved.shape[1:])
    for tap, offset in enumerate((-1, 0, 1, 2)):
        idx = np.clip(base + offset, 0, in_len - 1)  # edge replicate
        w = weights[:, tap].reshape((-1,) + (1,) * (moved.ndim - 1))
        acc += w * moved[idx]
    return np.moveaxis(acc, 0, axis)


def bicubic_resize(plane: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Separable Keys bicubic resampling of a unit-range plane.

    Half-pixel centers, replicated edges, output clamped to [0, 1].
    """
    if out_w < 1 or out_h < 1:
        raise DataError(f"bicubic_resize target must be >= 1x1, got {out_w}x{out_h}")
    out = _resample_axis(plane, out_w, axis=1)
    out = _resample_axis(out, out_h, axis=0)
    return np.clip(out, 0.0, 1.0)


def resize_image(image: Image, out_w: int, out_h: int) -> Image:
    """Per-channel bicubic resize of an 8-bit image (same colorspace tag)."""
    chans = [
        quantize_u8(bicubic_resize(to_unit(image.data[:, :, c]), out_w, out_h))
        for c in range(image.channels)
    ]
    return Image(image.colorspace, np.stack(chans, axis=2))


def pad_replicate(plane: np.ndarray, top: int, left: int, bottom: int, right: int) -> np.ndarray:
    """Grow a plane by replicating its nearest edge samples.

    Operates on the trailing two axes, so stacks of planes pad in one call.
    """
    if min(top, left, bottom, right) < 0:
        raise ValueError("padding margins must be non-negative")
    width = [(0, 0)] * (plane.ndim - 2) + [(top, bottom), (left, right)]
    return np.pad(plane, width, mode="edge")


def rotate90(plane: np.ndarray, k: int) -> np.ndarray:
    """Counter-clockwise rotation by k * 90 degrees (k taken mod 4).

    Rotates the trailing two axes; leading axes (batch) pass through.
    """
    return np.rot90(plane, k % 4, axes=(-2, -1))
