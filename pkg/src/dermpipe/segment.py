"""Binary lesion masks: application, procedural extension, anomaly checks,
and mask-vs-truth scoring."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .imaging import RasterImage

__all__ = [
    "BinaryMask",
    "SegmentConfig",
    "AnomalyFlag",
    "extend_mask",
    "apply_mask",
    "detect_anomalies",
    "jaccard_index",
    "pixel_sens_spec",
    "load_mask",
    "mask_path_for",
    "evaluate_mask_dirs",
]


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Per-pixel lesion map, True = lesion."""

    bits: np.ndarray

    def __post_init__(self) -> None:
        if not isinstance(self.bits, np.ndarray) or self.bits.dtype != np.bool_:
            raise TypeError("mask bits must be a boolean ndarray")
        if self.bits.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {self.bits.shape}")

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def area(self) -> int:
        return int(self.bits.sum())

    @classmethod
    def from_array(cls, values) -> "BinaryMask":
        return cls(np.asarray(values) != 0)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    def __ne__(self, other) -> bool:
        result = self.__eq__(other)
        return result if result is NotImplemented else not result


@dataclass(frozen=True)
class SegmentConfig:
    """How masks are applied: dilation amount, where mask files live, and the
    fill for masked-out pixels."""

    extension_factor: float
    mask_dir: Path
    background: tuple[int, int, int] = (0, 0, 0)

    def __post_init__(self) -> None:
        if self.extension_factor <= 0:
            raise ValueError("extension factor must be positive (non-positive disables segmentation upstream)")


class AnomalyFlag(enum.Enum):
    NO_LESION = "NoLesion"
    TOO_MANY_COMPONENTS = "TooManyComponents"
    TOO_SMALL = "TooSmall"
    TOO_BIG = "TooBig"


def extend_mask(mask: BinaryMask, factor: float) -> BinaryMask:
    """Dilate with a disk whose radius is `factor` times the equivalent
    lesion radius sqrt(area / pi), rounded to the nearest pixel. The factor
    is dimensionless, so the retained margin scales with lesion size."""
    if factor < 0:
        raise ValueError("extension factor must be nonnegative")
    area = mask.area()
    if factor == 0 or area == 0:
        return BinaryMask(mask.bits.copy())
    radius = int(math.floor(factor * math.sqrt(area / math.pi) + 0.5))
    if radius == 0:
        return BinaryMask(mask.bits.copy())
    distance = ndimage.distance_transform_edt(~mask.bits)
    # True distances are sqrt of integers, so a tiny epsilon only absorbs
    # float error on exact boundary hits.
    return BinaryMask(distance <= radius + 1e-6)


def apply_mask(img: RasterImage, mask: BinaryMask, background=(0, 0, 0)) -> RasterImage:
    """Keep lesion pixels, replace everything else with the background color."""
    if (img.height, img.width) != (mask.height, mask.width):
        raise ValueError(
            f"mask {mask.width}x{mask.height} does not match image {img.width}x{img.height}"
        )
    bg = np.asarray(background, dtype=np.uint8)
    if bg.shape != (3,):
        raise ValueError("background must be a 3-channel value")
    out = np.where(mask.bits[..., None], img.data, bg)
    return RasterImage(np.ascontiguousarray(out), img.space)


def detect_anomalies(
    mask: BinaryMask,
    max_components: int = 3,
    min_area_frac: float = 0.01,
    max_area_frac: float = 0.95,
) -> list[AnomalyFlag]:
    """Heuristic sanity flags for an automatically produced mask. Flags are
    warnings, not errors: callers keep processing flagged images."""
    if not (0 < min_area_frac < max_area_frac <= 1):
        raise ValueError("need 0 < min_area_frac < max_area_frac <= 1")
    area = mask.area()
    if area == 0:
        return [AnomalyFlag.NO_LESION]
    flags: list[AnomalyFlag] = []
    _, n_components = ndimage.label(mask.bits, structure=np.ones((3, 3), dtype=int))
    if n_components > max_components:
        flags.append(AnomalyFlag.TOO_MANY_COMPONENTS)
    fraction = area / (mask.width * mask.height)
    if fraction < min_area_frac:
        flags.append(AnomalyFlag.TOO_SMALL)
    if fraction > max_area_frac:
        flags.append(AnomalyFlag.TOO_BIG)
    return flags


def _check_same_shape(pred: BinaryMask, truth: BinaryMask) -> None:
    if pred.bits.shape != truth.bits.shape:
        raise ValueError(f"mask shapes differ: {pred.bits.shape} vs {truth.bits.shape}")


def jaccard_index(pred: BinaryMask, truth: BinaryMask) -> float:
    """Intersection over union of the two lesion areas."""
    _check_same_shape(pred, truth)
    union = int((pred.bits | truth.bits).sum())
    if union == 0:
        raise ValueError("Jaccard index undefined for two empty masks")
    intersection = int((pred.bits & truth.bits).sum())
    return intersection / union


def pixel_sens_spec(pred: BinaryMask, truth: BinaryMask) -> tuple[float, float]:
    """Pixelwise sensitivity TP/(TP+FN) and specificity TN/(TN+FP)."""
    _check_same_shape(pred, truth)
    tp = int((pred.bits & truth.bits).sum())
    fn = int((~pred.bits & truth.bits).sum())
    fp = int((pred.bits & ~truth.bits).sum())
    tn = int((~pred.bits & ~truth.bits).sum())
    if tp + fn == 0 or tn + fp == 0:
        raise ValueError("sensitivity/specificity undefined: truth has only one pixel class")
    return tp / (tp + fn), tn / (tn + fp)


# --------------------------------------------------------------------------
# Mask files
# --------------------------------------------------------------------------

def mask_path_for(image_path, mask_dir) -> Path:
    """Masks are stored as `<image_stem>_mask.png` inside the mask directory."""
    return Path(mask_dir) / f"{Path(image_path).stem}_mask.png"


def load_mask(path) -> BinaryMask:
    """Read a mask image; any nonzero sample in any channel counts as lesion."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"mask file not found: {path}")
    with Image.open(path) as im:
        arr = np.asarray(im)
    if arr.ndim == 3:
        return BinaryMask(np.ascontiguousarray((arr != 0).any(axis=2)))
    return BinaryMask(np.ascontiguousarray(arr != 0))


def evaluate_mask_dirs(pred_dir, truth_dir) -> list[dict]:
    """Score every PNG present in both directories (matched by file name).

    Returns one dict per file with keys name/jaccard/sensitivity/specificity;
    metrics that are undefined for a pair are None.
    """
    pred_dir = Path(pred_dir)
    truth_dir = Path(truth_dir)
    names = sorted(p.name for p in pred_dir.glob("*.png") if (truth_dir / p.name).exists())
    if not names:
        raise ValueError(f"no matching .png files between {pred_dir} and {truth_dir}")
    results = []
    for name in names:
        pred = load_mask(pred_dir / name)
        truth = load_mask(truth_dir / name)
        entry: dict = {"name": name, "jaccard": None, "sensitivity": None, "specificity": None}
        try:
            entry["jaccard"] = jaccard_index(pred, truth)
        except ValueError:
            pass
        try:
            entry["sensitivity"], entry["specificity"] = pixel_sens_spec(pred, truth)
        except ValueError:
            pass
        results.append(entry)
    return results
