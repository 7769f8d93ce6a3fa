"""Image providers and the deterministic augmentation stack.

A provider is an indexed, countable source of (image, label) pairs.
Augmentation stages decorate a provider: each stage multiplies the index
space by its variant count, and an index decomposes into mixed-radix digits
(base image outermost, so all variants of one image are contiguous).
Variant 0 of every stage is the identity.

Transforms run at the base provider's native resolution; the base's
finishing step (resize to the training resolution, color conversion) is
applied after the transforms.
"""
from __future__ import annotations

import logging
import math
import random
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator, NamedTuple, Sequence

from . import segment as seg
from .dataset import DatasetIndex
from .imaging import (
    ColorSpace,
    RasterImage,
    ResizeFilter,
    adjust_brightness,
    adjust_saturation,
    convert_colorspace,
    hflip,
    load_image,
    resize,
    rotate,
)

__all__ = [
    "NO_SHUFFLE",
    "Provenance",
    "ProviderItem",
    "StreamError",
    "ImageProvider",
    "ListImageProvider",
    "DiskImageProvider",
    "AugmentStage",
    "IdentityStage",
    "HFlipStage",
    "RotationStage",
    "BrightnessStage",
    "SaturationStage",
    "AugmentChain",
    "make_preset",
    "is_preset",
    "preset_names",
    "register_preset",
    "epoch_order",
    "prefetch_stream",
]

logger = logging.getLogger(__name__)

# Sentinel seed: epoch_order returns the identity permutation for any epoch.
NO_SHUFFLE = None


@dataclass(frozen=True)
class Provenance:
    """Where an item came from: index into the ultimate base provider, the
    source file (when there is one), and the transform descriptions applied."""

    base_index: int
    source: str | None = None
    transforms: tuple[str, ...] = ()


class ProviderItem(NamedTuple):
    image: RasterImage
    label: str
    provenance: Provenance


@dataclass(frozen=True)
class StreamError:
    """Item-level failure inside a prefetch stream; occupies the failed
    item's position so delivery order is preserved."""

    index: int
    message: str
    provenance: Provenance | None = None


def _check_index(index: int, count: int) -> None:
    if not 0 <= index < count:
        raise IndexError(f"index {index} out of range for provider of {count} items")


class ImageProvider(ABC):
    """Indexed, countable source of (image, label) pairs. `get` is
    deterministic: the same index always yields the same bits."""

    @abstractmethod
    def count(self) -> int: ...

    @abstractmethod
    def get(self, index: int) -> ProviderItem: ...

    def get_native(self, index: int) -> ProviderItem:
        """The item before finishing; augmentation transforms apply here."""
        return self.get(index)

    def finish(self, image: RasterImage) -> RasterImage:
        """Finishing applied after augmentation (default: none)."""
        return image

    def provenance_of(self, index: int) -> Provenance | None:
        """Best-effort provenance without decoding (for error reporting)."""
        return None

    def __len__(self) -> int:
        return self.count()


class ListImageProvider(ImageProvider):
    """In-memory provider, mainly for tests and demos."""

    def __init__(self, items: Sequence[tuple[RasterImage, str]]):
        self._items = list(items)

    def count(self) -> int:
        return len(self._items)

    def get(self, index: int) -> ProviderItem:
        _check_index(index, len(self._items))
        image, label = self._items[index]
        return ProviderItem(image, label, Provenance(index))

    def provenance_of(self, index: int) -> Provenance:
        return Provenance(index)


class DiskImageProvider(ImageProvider):
    """Reads dataset records from disk, optionally applying segmentation
    masks, and finishes by resizing to the square training resolution and
    converting the color space."""

    def __init__(
        self,
        index: DatasetIndex,
        data_root,
        img_size: int,
        resize_filter: ResizeFilter = ResizeFilter.NEAREST,
        color_space: ColorSpace = ColorSpace.RGB,
        segment_cfg: seg.SegmentConfig | None = None,
        anomaly_warnings: bool = True,
    ):
        if img_size < 1:
            raise ValueError("img_size must be >= 1")
        self._index = index
        self._root = Path(data_root)
        self._img_size = img_size
        self._filter = resize_filter
        self._space = color_space
        self._segment = segment_cfg
        self._warn = anomaly_warnings

    @property
    def index(self) -> DatasetIndex:
        return self._index

    def count(self) -> int:
        return len(self._index.records)

    def _source_path(self, index: int) -> Path:
        return self._root / self._index.records[index][0]

    def provenance_of(self, index: int) -> Provenance:
        return Provenance(index, str(self._source_path(index)))

    def get_native(self, index: int) -> ProviderItem:
        _check_index(index, self.count())
        rel_path, label = self._index.records[index]
        image = load_image(self._root / rel_path)
        if self._segment is not None:
            image = self._apply_segmentation(image, rel_path)
        return ProviderItem(image, label, self.provenance_of(index))

    def _apply_segmentation(self, image: RasterImage, rel_path: str) -> RasterImage:
        cfg = self._segment
        mask = seg.load_mask(seg.mask_path_for(rel_path, cfg.mask_dir))
        if (mask.height, mask.width) != (image.height, image.width):
            raise ValueError(
                f"mask for {rel_path!r} is {mask.width}x{mask.height}, image is {image.width}x{image.height}"
            )
        if self._warn:
            flags = seg.detect_anomalies(mask)
            if flags:
                logger.warning("mask anomalies for %s: %s", rel_path, [f.value for f in flags])
        mask = seg.extend_mask(mask, cfg.extension_factor)
        return seg.apply_mask(image, mask, cfg.background)

    def finish(self, image: RasterImage) -> RasterImage:
        out = resize(image, self._img_size, self._img_size, self._filter)
        if self._space is not ColorSpace.RGB:
            out = convert_colorspace(out, self._space)
        return out

    def get(self, index: int) -> ProviderItem:
        item = self.get_native(index)
        return item._replace(image=self.finish(item.image))


# --------------------------------------------------------------------------
# Augmentation stages
# --------------------------------------------------------------------------

class AugmentStage(ABC):
    """One decorator in a chain: `factor` enumerated variants of a transform.
    Variant 0 must be the identity."""

    name: str = "stage"

    @property
    @abstractmethod
    def factor(self) -> int: ...

    @abstractmethod
    def apply(self, image: RasterImage, variant: int) -> RasterImage: ...

    def describe(self, variant: int) -> str:
        return f"{self.name}[{variant}]"


class IdentityStage(AugmentStage):
    """Factor-1 passthrough; useful to check decorator transparency."""

    name = "identity"

    @property
    def factor(self) -> int:
        return 1

    def apply(self, image: RasterImage, variant: int) -> RasterImage:
        return image


class HFlipStage(AugmentStage):
    """Variant 0: unchanged; variant 1: mirrored left-right."""

    name = "hflip"

    @property
    def factor(self) -> int:
        return 2

    def apply(self, image: RasterImage, variant: int) -> RasterImage:
        return hflip(image) if variant else image

    def describe(self, variant: int) -> str:
        return "hflip" if variant else "hflip[0]"


class RotationStage(AugmentStage):
    """One variant per angle; the first angle must be 0 (identity)."""

    name = "rot"

    def __init__(self, angles: Sequence[float], fill=(0, 0, 0)):
        angles = tuple(float(a) for a in angles)
        if not angles:
            raise ValueError("need at least one rotation angle")
        if angles[0] != 0.0:
            raise ValueError("the first rotation angle must be 0 (identity variant)")
        self._angles = angles
        self._fill = fill

    @property
    def angles(self) -> tuple[float, ...]:
        return self._angles

    @property
    def factor(self) -> int:
        return len(self._angles)

    def apply(self, image: RasterImage, variant: int) -> RasterImage:
        angle = self._angles[variant]
        return rotate(image, angle, self._fill) if angle else image

    def describe(self, variant: int) -> str:
        return f"rot{self._angles[variant]:g}"


class BrightnessStage(AugmentStage):
    """One variant per multiplier; the first must be 1.0 (identity)."""

    name = "brightness"

    def __init__(self, factors: Sequence[float]):
        factors = tuple(float(f) for f in factors)
        if not factors or factors[0] != 1.0:
            raise ValueError("the first brightness factor must be 1.0 (identity variant)")
        self._factors = factors

    @property
    def factor(self) -> int:
        return len(self._factors)

    def apply(self, image: RasterImage, variant: int) -> RasterImage:
        value = self._factors[variant]
        return adjust_brightness(image, value) if value != 1.0 else image

    def describe(self, variant: int) -> str:
        return f"brightness{self._factors[variant]:g}"


class SaturationStage(AugmentStage):
    """One variant per blend factor; the first must be 1.0 (identity)."""

    name = "saturation"

    def __init__(self, factors: Sequence[float]):
        factors = tuple(float(f) for f in factors)
        if not factors or factors[0] != 1.0:
            raise ValueError("the first saturation factor must be 1.0 (identity variant)")
        self._factors = factors

    @property
    def factor(self) -> int:
        return len(self._factors)

    def apply(self, image: RasterImage, variant: int) -> RasterImage:
        value = self._factors[variant]
        return adjust_saturation(image, value) if value != 1.0 else image

    def describe(self, variant: int) -> str:
        return f"saturation{self._factors[variant]:g}"


class AugmentChain(ImageProvider):
    """A base provider decorated by an ordered list of stages. The chain's
    count is the base count times the product of stage factors."""

    def __init__(self, base: ImageProvider, stages: Sequence[AugmentStage]):
        self._base = base
        self._stages = tuple(stages)
        self._factor = math.prod(s.factor for s in self._stages)
        # Digit place values; the first declared stage is most significant.
        places = []
        remaining = self._factor
        for stage in self._stages:
            remaining //= stage.factor
            places.append(remaining)
        self._places = tuple(places)

    @property
    def base(self) -> ImageProvider:
        return self._base

    @property
    def stages(self) -> tuple[AugmentStage, ...]:
        return self._stages

    @property
    def factor(self) -> int:
        return self._factor

    def count(self) -> int:
        return self._base.count() * self._factor

    def _decompose(self, index: int) -> tuple[int, tuple[int, ...]]:
        _check_index(index, self.count())
        base_index, rem = divmod(index, self._factor)
        digits = []
        for place in self._places:
            digit, rem = divmod(rem, place)
            digits.append(digit)
        return base_index, tuple(digits)

    def get_native(self, index: int) -> ProviderItem:
        base_index, digits = self._decompose(index)
        item = self._base.get_native(base_index)
        image = item.image
        described = []
        for stage, digit in zip(self._stages, digits):
            image = stage.apply(image, digit)
            described.append(stage.describe(digit))
        prov = item.provenance
        prov = Provenance(prov.base_index, prov.source, prov.transforms + tuple(described))
        return ProviderItem(image, item.label, prov)

    def finish(self, image: RasterImage) -> RasterImage:
        return self._base.finish(image)

    def get(self, index: int) -> ProviderItem:
        item = self.get_native(index)
        return item._replace(image=self.finish(item.image))

    def provenance_of(self, index: int) -> Provenance | None:
        base_index, digits = self._decompose(index)
        prov = self._base.provenance_of(base_index)
        if prov is None:
            prov = Provenance(base_index)
        described = tuple(stage.describe(d) for stage, d in zip(self._stages, digits))
        return Provenance(prov.base_index, prov.source, prov.transforms + described)


# --------------------------------------------------------------------------
# Preset factory
# --------------------------------------------------------------------------

_PRESET_BUILDERS: dict[str, Callable[[], list[AugmentStage]]] = {
    "none": lambda: [],
    "hflip": lambda: [HFlipStage()],
    "hflip_rot4": lambda: [HFlipStage(), RotationStage((0, 90, 180, 270))],
    "hflip_rot24": lambda: [HFlipStage(), RotationStage(tuple(range(0, 360, 15)))],
}


def is_preset(name: str) -> bool:
    return name in _PRESET_BUILDERS


def preset_names() -> tuple[str, ...]:
    return tuple(sorted(_PRESET_BUILDERS))


def register_preset(name: str, builder: Callable[[], list[AugmentStage]]) -> None:
    """Add a custom mnemonic (for example a brightness/saturation stack).
    Names must be new; the shipped presets cannot be redefined."""
    if name in _PRESET_BUILDERS:
        raise ValueError(f"augmentation preset {name!r} already registered")
    _PRESET_BUILDERS[name] = builder


def make_preset(name: str, base: ImageProvider) -> AugmentChain:
    """Build the augmentation chain a mnemonic stands for."""
    try:
        builder = _PRESET_BUILDERS[name]
    except KeyError:
        raise ValueError(f"unknown augmentation preset {name!r} (known: {', '.join(preset_names())})") from None
    return AugmentChain(base, builder())


# --------------------------------------------------------------------------
# Epoch ordering and the prefetch stream
# --------------------------------------------------------------------------

def epoch_order(chain: ImageProvider, epoch: int, seed) -> list[int]:
    """Deterministic permutation of [0, count) keyed by (seed, epoch). The
    NO_SHUFFLE sentinel yields the identity for every epoch."""
    order = list(range(chain.count()))
    if seed is NO_SHUFFLE:
        return order
    # String seeding is hashed with sha512 by random.Random, stable across
    # runs and platforms.
    rng = random.Random(f"shuffle:{int(seed)}:{int(epoch)}")
    rng.shuffle(order)
    return order


def prefetch_stream(
    chain: ImageProvider,
    order: Sequence[int],
    workers: int = 1,
    capacity: int = 8,
) -> Iterator[ProviderItem | StreamError]:
    """Decode and augment on a worker pool, delivering items exactly in
    `order` regardless of worker count.

    At most `capacity + workers` items exist decoded-but-undelivered at any
    time (a reordering buffer of `capacity` plus one in-flight item per
    worker). An exception while producing one item becomes a StreamError at
    that item's position; the stream keeps going.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if capacity < 1:
        raise ValueError("capacity must be >= 1")
    positions = list(order)
    total = len(positions)

    def generate() -> Iterator[ProviderItem | StreamError]:
        cond = threading.Condition()
        results: dict[int, ProviderItem | StreamError] = {}
        state = {"next_claim": 0, "delivered": 0, "stop": False}
        budget = capacity + workers

        def produce(chain_index: int) -> ProviderItem | StreamError:
            try:
                return chain.get(chain_index)
            except Exception as exc:
                try:
                    prov = chain.provenance_of(chain_index)
                except Exception:
                    prov = None
                return StreamError(chain_index, f"{type(exc).__name__}: {exc}", prov)

        def worker() -> None:
            while True:
                with cond:
                    while not state["stop"] and state["next_claim"] - state["delivered"] >= budget:
                        cond.wait()
                    if state["stop"] or state["next_claim"] >= total:
                        return
                    pos = state["next_claim"]
                    state["next_claim"] += 1
                item = produce(positions[pos])
                with cond:
                    results[pos] = item
                    cond.notify_all()

        threads = [threading.Thread(target=worker, daemon=True) for _ in range(workers)]
        for t in threads:
            t.start()
        try:
            for pos in range(total):
                with cond:
                    while pos not in results:
                        cond.wait()
                    item = results.pop(pos)
                    state["delivered"] += 1
                    cond.notify_all()
                yield item
        finally:
            with cond:
                state["stop"] = True
                cond.notify_all()
            for t in threads:
                t.join()

    return generate()
