"""Pixel rasters and the image math used throughout the pipeline.

Everything flows through 8-bit interleaved three-channel rasters. Internal
arithmetic runs in double precision; each operation quantizes exactly once
on the way out (round half away from zero, clamp to [0, 255]).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from PIL import Image

__all__ = [
    "ColorSpace",
    "ResizeFilter",
    "RasterImage",
    "resize",
    "convert_colorspace",
    "hflip",
    "rotate",
    "adjust_brightness",
    "adjust_saturation",
    "load_image",
    "save_image",
]


class ResizeFilter(enum.Enum):
    """Resampling kernel selector for :func:`resize`."""

    NEAREST = "nearest"
    BILINEAR = "bilinear"
    BICUBIC = "bicubic"
    LANCZOS = "lanczos"

    @classmethod
    def parse(cls, token: str) -> "ResizeFilter":
        try:
            return cls(token.strip().lower())
        except ValueError:
            known = ", ".join(f.value for f in cls)
            raise ValueError(f"unknown resize filter {token!r} (expected one of: {known})") from None


class ColorSpace(enum.Enum):
    """Channel semantics of a raster. Non-RGB spaces are packed into the same
    three 8-bit channels (see :func:`convert_colorspace` for the mapping)."""

    RGB = "RGB"
    HSV = "HSV"
    LAB = "LAB"
    YCBCR = "YCbCr"

    @classmethod
    def parse(cls, token: str) -> "ColorSpace":
        wanted = token.strip().lower()
        for space in cls:
            if space.value.lower() == wanted:
                return space
        known = ", ".join(s.value for s in cls)
        raise ValueError(f"unknown color space {token!r} (expected one of: {known})")


def _quantize_u8(values: np.ndarray) -> np.ndarray:
    """Clamp to [0, 255] and round half away from zero, producing uint8."""
    return np.floor(np.clip(values, 0.0, 255.0) + 0.5).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class RasterImage:
    """Decoded pixel raster: shape (height, width, 3), dtype uint8, plus the
    color-space tag describing what the channels mean."""

    data: np.ndarray
    space: ColorSpace = ColorSpace.RGB

    def __post_init__(self) -> None:
        d = self.data
        if not isinstance(d, np.ndarray) or d.dtype != np.uint8:
            raise TypeError("raster data must be a uint8 ndarray")
        if d.ndim != 3 or d.shape[2] != 3:
            raise ValueError(f"raster data must have shape (h, w, 3), got {d.shape}")
        if d.shape[0] < 1 or d.shape[1] < 1:
            raise ValueError("raster must be at least 1x1")

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @classmethod
    def constant(cls, width: int, height: int, value, space: ColorSpace = ColorSpace.RGB) -> "RasterImage":
        data = np.empty((height, width, 3), dtype=np.uint8)
        data[...] = np.asarray(value, dtype=np.uint8)
        return cls(data, space)

    @classmethod
    def from_float(cls, values: np.ndarray, space: ColorSpace = ColorSpace.RGB) -> "RasterImage":
        return cls(_quantize_u8(np.asarray(values, dtype=np.float64)), space)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RasterImage):
            return NotImplemented
        return self.space is other.space and np.array_equal(self.data, other.data)

    def __ne__(self, other) -> bool:
        result = self.__eq__(other)
        return result if result is NotImplemented else not result


# --------------------------------------------------------------------------
# Resampling
# --------------------------------------------------------------------------

def _box_weight(x: np.ndarray) -> np.ndarray:
    # Half-open at +0.5: an exact tie picks the left sample instead of
    # averaging both, which keeps "nearest" a single-sample pick on upscales.
    return ((x >= -0.5) & (x < 0.5)).astype(np.float64)


def _triangle_weight(x: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, 1.0 - np.abs(x))


def _catmull_rom_weight(x: np.ndarray) -> np.ndarray:
    # Cubic convolution kernel with a = -0.5 (Catmull-Rom).
    ax = np.abs(x)
    inner = (1.5 * ax - 2.5) * ax * ax + 1.0
    outer = ((-0.5 * ax + 2.5) * ax - 4.0) * ax + 2.0
    return np.where(ax <= 1.0, inner, np.where(ax < 2.0, outer, 0.0))


def _lanczos3_weight(x: np.ndarray) -> np.ndarray:
    # np.sinc is the normalized sinc, so this is sinc(x) * sinc(x/3) inside
    # the three-lobe window.
    return np.where(np.abs(x) < 3.0, np.sinc(x) * np.sinc(x / 3.0), 0.0)


_FILTERS = {
    ResizeFilter.NEAREST: (0.5, _box_weight),
    ResizeFilter.BILINEAR: (1.0, _triangle_weight),
    ResizeFilter.BICUBIC: (2.0, _catmull_rom_weight),
    ResizeFilter.LANCZOS: (3.0, _lanczos3_weight),
}


def _axis_weights(in_len: int, out_len: int, filt: ResizeFilter) -> np.ndarray:
    """Dense (out_len, in_len) weight matrix for one separable pass.

    Output pixel centers map to source coordinates via the half-pixel
    convention. When downscaling the kernel is stretched by the scale factor
    so it covers the full source footprint of each output pixel. Source
    indices falling outside the image are clamped to the border sample, and
    every row is normalized to sum to one.
    """
    support, weight_fn = _FILTERS[filt]
    scale = in_len / out_len
    stretch = max(scale, 1.0)
    radius = support * stretch
    matrix = np.zeros((out_len, in_len), dtype=np.float64)
    for j in range(out_len):
        center = (j + 0.5) * scale - 0.5
        lo = int(math.ceil(center - radius))
        hi = int(math.floor(center + radius))
        idx = np.arange(lo, hi + 1)
        w = weight_fn((idx - center) / stretch)
        w = w / w.sum()
        np.add.at(matrix[j], np.clip(idx, 0, in_len - 1), w)
    return matrix


def resize(img: RasterImage, out_w: int, out_h: int, filt: ResizeFilter) -> RasterImage:
    """Separable two-pass resample (horizontal, then vertical).

    The color-space tag passes through untouched; resizing non-RGB rasters
    resamples whatever the channels hold.
    """
    if out_w < 1 or out_h < 1:
        raise ValueError(f"target size must be at least 1x1, got {out_w}x{out_h}")
    arr = img.data.astype(np.float64)
    if out_w != img.width:
        wx = _axis_weights(img.width, out_w, filt)
        arr = np.einsum("hwc,ow->hoc", arr, wx, optimize=True)
    if out_h != img.height:
        wy = _axis_weights(img.height, out_h, filt)
        arr = np.einsum("hwc,oh->owc", arr, wy, optimize=True)
    return RasterImage(_quantize_u8(arr), img.space)


# --------------------------------------------------------------------------
# Color-space conversion
# --------------------------------------------------------------------------

def rgb_to_hsv_channels(rgb: np.ndarray) -> np.ndarray:
    """Hexcone HSV from RGB, all channels scaled to 0..255 (hue spans the
    full wheel). Operates on float arrays of shape (..., 3)."""
    scaled = np.asarray(rgb, dtype=np.float64) / 255.0
    r, g, b = scaled[..., 0], scaled[..., 1], scaled[..., 2]
    v = np.max(scaled, axis=-1)
    c = v - np.min(scaled, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(v > 0.0, c / np.where(v > 0.0, v, 1.0), 0.0)
        hr = ((g - b) / c) % 6.0
        hg = (b - r) / c + 2.0
        hb = (r - g) / c + 4.0
    h = np.select([c == 0.0, v == r, v == g], [0.0, hr, hg], default=hb)
    return np.stack([h * (255.0 / 6.0), s * 255.0, v * 255.0], axis=-1)


def hsv_to_rgb_channels(hsv: np.ndarray) -> np.ndarray:
    """Inverse of :func:`rgb_to_hsv_channels` (float in, float out, 0..255)."""
    arr = np.asarray(hsv, dtype=np.float64)
    h6 = arr[..., 0] * (6.0 / 255.0)
    s = arr[..., 1] / 255.0
    v = arr[..., 2] / 255.0
    c = v * s
    x = c * (1.0 - np.abs(h6 % 2.0 - 1.0))
    sextant = np.floor(h6).astype(np.int64) % 6
    zero = np.zeros_like(c)
    r1 = np.select([sextant == 0, sextant == 1, sextant == 2, sextant == 3, sextant == 4], [c, x, zero, zero, x], default=c)
    g1 = np.select([sextant == 0, sextant == 1, sextant == 2, sextant == 3, sextant == 4], [x, c, c, x, zero], default=zero)
    b1 = np.select([sextant == 0, sextant == 1, sextant == 2, sextant == 3, sextant == 4], [zero, zero, x, c, c], default=x)
    m = v - c
    return np.stack([r1 + m, g1 + m, b1 + m], axis=-1) * 255.0


_SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ_TO_SRGB = np.linalg.inv(_SRGB_TO_XYZ)
_D65_WHITE = np.array([0.95047, 1.0, 1.08883])


def _srgb_linearize(u: np.ndarray) -> np.ndarray:
    return np.where(u <= 0.04045, u / 12.92, ((u + 0.055) / 1.055) ** 2.4)


def _srgb_delinearize(u: np.ndarray) -> np.ndarray:
    u = np.clip(u, 0.0, 1.0)
    return np.where(u <= 0.0031308, u * 12.92, 1.055 * u ** (1.0 / 2.4) - 0.055)


def _lab_forward(t: np.ndarray) -> np.ndarray:
    d = 6.0 / 29.0
    return np.where(t > d ** 3, np.cbrt(t), t / (3.0 * d * d) + 4.0 / 29.0)


def _lab_inverse(t: np.ndarray) -> np.ndarray:
    d = 6.0 / 29.0
    return np.where(t > d, t ** 3, 3.0 * d * d * (t - 4.0 / 29.0))


def rgb_to_lab_channels(rgb: np.ndarray) -> np.ndarray:
    """CIELAB (D65) from sRGB, packed for 8-bit storage: L scaled by 255/100,
    a and b offset by +128. Float in, float out."""
    linear = _srgb_linearize(np.asarray(rgb, dtype=np.float64) / 255.0)
    xyz = linear @ _SRGB_TO_XYZ.T
    f = _lab_forward(xyz / _D65_WHITE)
    lum = 116.0 * f[..., 1] - 16.0
    a = 500.0 * (f[..., 0] - f[..., 1])
    b = 200.0 * (f[..., 1] - f[..., 2])
    return np.stack([lum * (255.0 / 100.0), a + 128.0, b + 128.0], axis=-1)


def lab_to_rgb_channels(lab: np.ndarray) -> np.ndarray:
    """Inverse of :func:`rgb_to_lab_channels` (float in, float out, 0..255)."""
    arr = np.asarray(lab, dtype=np.float64)
    lum = arr[..., 0] * (100.0 / 255.0)
    a = arr[..., 1] - 128.0
    b = arr[..., 2] - 128.0
    fy = (lum + 16.0) / 116.0
    fx = fy + a / 500.0
    fz = fy - b / 200.0
    xyz = np.stack([_lab_inverse(fx), _lab_inverse(fy), _lab_inverse(fz)], axis=-1) * _D65_WHITE
    linear = xyz @ _XYZ_TO_SRGB.T
    return _srgb_delinearize(linear) * 255.0


def rgb_to_ycbcr_channels(rgb: np.ndarray) -> np.ndarray:
    """BT.601 full-range YCbCr from RGB. Float in, float out, 0..255."""
    arr = np.asarray(rgb, dtype=np.float64)
    r, g, b = arr[..., 0], arr[..., 1], arr[..., 2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b
    cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b
    return np.stack([y, cb, cr], axis=-1)


def ycbcr_to_rgb_channels(ycc: np.ndarray) -> np.ndarray:
    """Inverse of :func:`rgb_to_ycbcr_channels` (float in, float out)."""
    arr = np.asarray(ycc, dtype=np.float64)
    y = arr[..., 0]
    cb = arr[..., 1] - 128.0
    cr = arr[..., 2] - 128.0
    r = y + 1.402 * cr
    g = y - 0.344136 * cb - 0.714136 * cr
    b = y + 1.772 * cb
    return np.stack([r, g, b], axis=-1)


_FROM_RGB = {
    ColorSpace.HSV: rgb_to_hsv_channels,
    ColorSpace.LAB: rgb_to_lab_channels,
    ColorSpace.YCBCR: rgb_to_ycbcr_channels,
}
_TO_RGB = {
    ColorSpace.HSV: hsv_to_rgb_channels,
    ColorSpace.LAB: lab_to_rgb_channels,
    ColorSpace.YCBCR: ycbcr_to_rgb_channels,
}


def convert_colorspace(img: RasterImage, target: ColorSpace) -> RasterImage:
    """Convert between RGB and one of HSV / LAB / YCbCr.

    Conversions are defined from RGB; the reverse direction is supported so
    round trips can be checked. Converting directly between two non-RGB
    spaces is an error.
    """
    if target is img.space:
        return RasterImage(img.data.copy(), img.space)
    arr = img.data.astype(np.float64)
    if img.space is ColorSpace.RGB:
        out = _FROM_RGB[target](arr)
    elif target is ColorSpace.RGB:
        out = _TO_RGB[img.space](arr)
    else:
        raise ValueError(f"unsupported conversion {img.space.value} -> {target.value}")
    return RasterImage(_quantize_u8(out), target)


# --------------------------------------------------------------------------
# Geometry and photometric transforms
# --------------------------------------------------------------------------

def hflip(img: RasterImage) -> RasterImage:
    """Mirror left-right (column order reversed within each row)."""
    return RasterImage(np.ascontiguousarray(img.data[:, ::-1, :]), img.space)


def _bilinear_sample(data: np.ndarray, src_x: np.ndarray, src_y: np.ndarray, fill: np.ndarray) -> np.ndarray:
    """Sample (src_x, src_y) with bilinear weights; out-of-source corners
    contribute the fill color."""
    h, w = data.shape[:2]
    x0 = np.floor(src_x).astype(np.int64)
    y0 = np.floor(src_y).astype(np.int64)
    fx = src_x - x0
    fy = src_y - y0
    out = np.zeros(src_x.shape + (3,), dtype=np.float64)
    for dy, wy in ((0, 1.0 - fy), (1, fy)):
        for dx, wx in ((0, 1.0 - fx), (1, fx)):
            xs = x0 + dx
            ys = y0 + dy
            inside = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
            sample = data[np.clip(ys, 0, h - 1), np.clip(xs, 0, w - 1)].astype(np.float64)
            sample = np.where(inside[..., None], sample, fill)
            out += (wx * wy)[..., None] * sample
    return out


def rotate(img: RasterImage, degrees: float, fill=(0, 0, 0)) -> RasterImage:
    """Rotate counterclockwise about the image center.

    Multiples of 90 degrees are exact index permutations (width and height
    swap for 90/270). Any other angle is resampled bilinearly onto the same
    canvas; destination pixels with no source coverage take the fill color.
    """
    fill_arr = np.asarray(fill, dtype=np.float64)
    if fill_arr.shape == ():
        fill_arr = np.repeat(fill_arr, 3)
    if fill_arr.shape != (3,):
        raise ValueError("fill must be a scalar or a 3-channel value")
    deg = float(degrees) % 360.0
    if deg == 0.0:
        return RasterImage(img.data.copy(), img.space)
    if deg in (90.0, 180.0, 270.0):
        k = int(deg // 90.0)
        return RasterImage(np.ascontiguousarray(np.rot90(img.data, k)), img.space)
    h, w = img.height, img.width
    theta = math.radians(deg)
    cy = (h - 1) / 2.0
    cx = (w - 1) / 2.0
    ys, xs = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    dx = xs - cx
    dy = ys - cy
    cos_t = math.cos(theta)
    sin_t = math.sin(theta)
    src_x = cx + cos_t * dx - sin_t * dy
    src_y = cy + sin_t * dx + cos_t * dy
    out = _bilinear_sample(img.data, src_x, src_y, fill_arr)
    return RasterImage(_quantize_u8(out), img.space)


def _require_rgb(img: RasterImage, op: str) -> None:
    if img.space is not ColorSpace.RGB:
        raise ValueError(f"{op} is defined on RGB rasters, got {img.space.value}")


def adjust_brightness(img: RasterImage, factor: float) -> RasterImage:
    """Scale every sample by `factor` (clamped)."""
    _require_rgb(img, "adjust_brightness")
    if factor < 0:
        raise ValueError("brightness factor must be nonnegative")
    return RasterImage(_quantize_u8(img.data.astype(np.float64) * float(factor)), img.space)


_LUMA = np.array([0.299, 0.587, 0.114])


def adjust_saturation(img: RasterImage, factor: float) -> RasterImage:
    """Blend each pixel between its luminance gray and the original:
    out = gray + factor * (in - gray)."""
    _require_rgb(img, "adjust_saturation")
    if factor < 0:
        raise ValueError("saturation factor must be nonnegative")
    arr = img.data.astype(np.float64)
    gray = arr @ _LUMA
    out = gray[..., None] + float(factor) * (arr - gray[..., None])
    return RasterImage(_quantize_u8(out), img.space)


# --------------------------------------------------------------------------
# Codec boundary
# --------------------------------------------------------------------------

def load_image(path) -> RasterImage:
    """Decode PNG/JPEG (and anything else Pillow reads) to 8-bit RGB.

    Grayscale is promoted to three channels; alpha is composited over black.
    """
    with Image.open(path) as im:
        im.load()
        if "A" in im.getbands() or im.mode == "P":
            rgba = np.asarray(im.convert("RGBA"), dtype=np.float64)
            alpha = rgba[..., 3:4] / 255.0
            return RasterImage(_quantize_u8(rgba[..., :3] * alpha), ColorSpace.RGB)
        rgb = np.asarray(im.convert("RGB"), dtype=np.uint8)
    return RasterImage(np.ascontiguousarray(rgb), ColorSpace.RGB)


def save_image(img: RasterImage, path) -> None:
    """Encode the raw channels to `path` (format chosen from the suffix)."""
    Image.fromarray(img.data, mode="RGB").save(path)
