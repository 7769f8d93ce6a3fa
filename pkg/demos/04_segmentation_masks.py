"""Mask application with procedural extension, anomaly flags, and scoring.

The extension factor is dimensionless: the dilation radius is the factor
times the equivalent lesion radius sqrt(area/pi), so the retained margin
scales with lesion size.

    python demos/04_segmentation_masks.py
"""
from pathlib import Path

import numpy as np

from dermpipe import BinaryMask, apply_mask, detect_anomalies, extend_mask, jaccard_index, pixel_sens_spec
from dermpipe.imaging import RasterImage, save_image

out_dir = Path("demo_output")
out_dir.mkdir(exist_ok=True)

# a synthetic "lesion": darker blob on brighter skin
ys, xs = np.mgrid[0:64, 0:64]
blob = ((ys - 30) ** 2 + 2 * (xs - 34) ** 2) <= 250
skin = np.full((64, 64, 3), (205, 170, 150), dtype=np.uint8)
skin[blob] = (120, 70, 60)
image = RasterImage(skin)
save_image(image, out_dir / "lesion.png")

mask = BinaryMask(blob)
print(f"lesion area: {mask.area()} px, flags: {[f.value for f in detect_anomalies(mask)]}")

for factor in (0.0, 0.3, 0.8):
    grown = extend_mask(mask, factor)
    segmented = apply_mask(image, grown, background=(0, 0, 0))
    save_image(segmented, out_dir / f"segmented_f{factor:g}.png")
    print(f"factor {factor:g}: mask area {mask.area()} -> {grown.area()} px, "
          f"jaccard vs original {jaccard_index(grown, mask):.3f}")

# score a deliberately sloppy predicted mask against the truth
sloppy = extend_mask(mask, 0.4)
sens, spec = pixel_sens_spec(sloppy, mask)
print(f"\nsloppy prediction: sensitivity {sens:.3f}, specificity {spec:.3f}, "
      f"jaccard {jaccard_index(sloppy, mask):.3f}")
print(f"outputs in {out_dir}/")
