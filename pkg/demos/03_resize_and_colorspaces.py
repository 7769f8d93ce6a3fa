"""Resampling filters and color-space conversions on a test pattern.

Writes side-by-side outputs of the four resize filters plus HSV / LAB /
YCbCr channel packings into demo_output/.

    python demos/03_resize_and_colorspaces.py
"""
from pathlib import Path

import numpy as np

from dermpipe import ColorSpace, RasterImage, ResizeFilter, convert_colorspace, resize
from dermpipe.imaging import save_image

out_dir = Path("demo_output")
out_dir.mkdir(exist_ok=True)

# concentric rings: hard edges make the filter differences visible
ys, xs = np.mgrid[0:96, 0:96]
rings = ((np.sqrt((ys - 48.0) ** 2 + (xs - 48.0) ** 2) // 8) % 2) * 255
pattern = RasterImage(np.stack([rings, 255 - rings, np.full_like(rings, 128)], axis=-1).astype(np.uint8))
save_image(pattern, out_dir / "pattern.png")

for filt in ResizeFilter:
    small = resize(pattern, 24, 24, filt)
    big_again = resize(small, 96, 96, ResizeFilter.NEAREST)
    save_image(big_again, out_dir / f"resize_{filt.value}.png")
    print(f"wrote resize_{filt.value}.png  (96 -> 24 -> 96 to magnify the kernel footprint)")

for space in (ColorSpace.HSV, ColorSpace.LAB, ColorSpace.YCBCR):
    converted = convert_colorspace(pattern, space)
    save_image(converted, out_dir / f"channels_{space.value}.png")
    back = convert_colorspace(converted, ColorSpace.RGB)
    dev = np.abs(back.data.astype(int) - pattern.data.astype(int)).max()
    print(f"{space.value:>5}: packed channels written, round-trip max deviation {dev}")

print(f"\nall outputs in {out_dir}/")
