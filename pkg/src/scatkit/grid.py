"""Image containers, color conversion, and boundary padding.

Images are stored channel-major as (channels, height, width) float arrays,
values nominally in [0, 1] for RGB data.  Nothing in this module clamps;
clamping happens only at image export so gradients stay exact.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidInputError


class ColorSpace(Enum):
    RGB = "rgb"
    YUV = "yuv"
    GRAY = "gray"


class BoundaryMode(Enum):
    REFLECT = "reflect"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class ImageGrid:
    """Real-valued raster, channel-major storage.

    data is (channels, height, width); dtype float32 ("single") or
    float64 ("double").
    """

    data: np.ndarray
    color_space: ColorSpace = ColorSpace.RGB

    def __post_init__(self):
        if self.data.ndim != 3:
            raise InvalidInputError("image data must be (channels, height, width)")
        if self.data.dtype not in (np.float32, np.float64):
            raise InvalidInputError(f"unsupported image dtype {self.data.dtype}")
        if self.color_space is ColorSpace.GRAY and self.channels != 1:
            raise InvalidInputError("gray images must have exactly one channel")

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def precision(self) -> str:
        return "single" if self.data.dtype == np.float32 else "double"


# Zero-centered chroma; rows of the chroma part sum to zero so white maps
# to (1, 0, 0).
RGB_TO_YUV_MATRIX = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.168736, -0.331264, 0.5],
        [0.5, -0.418688, -0.081312],
    ],
    dtype=np.float64,
)
YUV_TO_RGB_MATRIX = np.linalg.inv(RGB_TO_YUV_MATRIX)


def _apply_color_matrix(img: ImageGrid, mat: np.ndarray, out_space: ColorSpace) -> ImageGrid:
    flat = img.data.reshape(3, -1)
    out = (mat.astype(np.float64) @ flat.astype(np.float64)).astype(img.data.dtype)
    return ImageGrid(out.reshape(img.data.shape), out_space)


def rgb_to_yuv(img: ImageGrid) -> ImageGrid:
    """Linear per-pixel transform to luma plus zero-centered chroma."""
    if img.color_space is not ColorSpace.RGB or img.channels != 3:
        raise InvalidInputError("rgb_to_yuv expects a 3-channel RGB image")
    return _apply_color_matrix(img, RGB_TO_YUV_MATRIX, ColorSpace.YUV)


def yuv_to_rgb(img: ImageGrid) -> ImageGrid:
    """Exact matrix inverse of rgb_to_yuv; values may leave [0, 1]."""
    if img.color_space is not ColorSpace.YUV:
        raise InvalidInputError("yuv_to_rgb expects a YUV image")
    return _apply_color_matrix(img, YUV_TO_RGB_MATRIX, ColorSpace.RGB)


def _normalize_margin(margin) -> tuple[int, int]:
    if isinstance(margin, (int, np.integer)):
        lo = hi = int(margin)
    else:
        lo, hi = (int(m) for m in margin)
    if lo < 0 or hi < 0:
        raise InvalidInputError("pad margins must be non-negative")
    return lo, hi


def pad(img: ImageGrid, margin, mode: BoundaryMode) -> ImageGrid:
    """Extend each channel independently at the spatial boundary.

    Reflect mirrors without repeating the edge pixel ([a,b,c] -> [b,a,b,c,b]
    for margin 1); Periodic wraps circularly.  margin may be a single int or
    a (low, high) pair applied to both axes.
    """
    lo, hi = _normalize_margin(margin)
    if lo == 0 and hi == 0:
        return img
    if mode is BoundaryMode.REFLECT:
        limit = min(img.height, img.width) - 1
        if max(lo, hi) > limit:
            raise InvalidInputError(
                f"reflect margin {max(lo, hi)} exceeds image extent {limit}"
            )
        np_mode = "reflect"
    else:
        np_mode = "wrap"
    out = np.pad(img.data, ((0, 0), (lo, hi), (lo, hi)), mode=np_mode)
    return ImageGrid(out, img.color_space)


@dataclass(frozen=True)
class PadPlan:
    """Padding geometry for one image side length.

    Carries the original size so coefficient cropping can be derived from
    the plan alone.
    """

    original: int
    padded_size: int
    margin_lo: int
    margin_hi: int


def pad_plan(n: int, J: int) -> PadPlan:
    """Smallest power-of-two plan leaving at least 2^J margin per side.

    The guaranteed margin keeps the 2^J-support low-pass from wrapping
    content; remaining slack is split evenly with the odd pixel on the
    high side.
    """
    if n < 2**J:
        raise InvalidInputError(f"image size {n} smaller than 2^J = {2**J}")
    need = n + 2 * 2**J
    padded = 1 << (need - 1).bit_length()
    slack = padded - n
    lo = slack // 2
    return PadPlan(n, padded, lo, slack - lo)


def unpad_coeffs(coeffs, plan: PadPlan, J: int):
    """Crop coefficient cells covering the original image extent.

    Accepts any value with a (..., rows, cols) ``data`` array and a
    ``replace``-compatible dataclass shape (ScatteringCoeffs in practice).
    """
    step = 2**J
    rows = coeffs.data.shape[-1]
    if rows * step != plan.padded_size:
        raise InvalidInputError(
            f"coefficient grid {rows} does not match plan {plan.padded_size}/2^{J}"
        )
    start = plan.margin_lo // step
    count = math.ceil(plan.original / step)
    cropped = coeffs.data[..., start : start + count, start : start + count].copy()
    return dataclasses.replace(coeffs, data=cropped)
