"""Build augmentation chains and watch the index space multiply.

A chain decorates a provider: `hflip` doubles it, `hflip_rot4` gives 8x,
`hflip_rot24` gives 48x. Index 0 of every image's block is the untouched
original, and the prefetch stream delivers items in a fixed order no matter
how many worker threads decode them.

    python demos/02_augmentation_chain.py
"""
import numpy as np

from dermpipe import ListImageProvider, epoch_order, make_preset, prefetch_stream, register_preset
from dermpipe.augment import BrightnessStage, HFlipStage
from dermpipe.imaging import RasterImage

rng = np.random.default_rng(0)
base = ListImageProvider(
    [(RasterImage(rng.integers(0, 256, (32, 32, 3), dtype=np.uint8)), f"label{i}") for i in range(5)]
)

for preset in ("none", "hflip", "hflip_rot4", "hflip_rot24"):
    chain = make_preset(preset, base)
    print(f"{preset:<12} count: {base.count()} -> {chain.count()}  (factor {chain.factor}x)")

chain = make_preset("hflip_rot24", base)
print("\nprovenance of a few indices:")
for index in (0, 1, 47, 48, 239):
    item = chain.get(index)
    print(f"  index {index:>3}: base {item.provenance.base_index}, transforms {item.provenance.transforms}")

# custom preset: brightness jitter stacked on a mirror
register_preset("demo_bright", lambda: [HFlipStage(), BrightnessStage((1.0, 0.7, 1.3))])
custom = make_preset("demo_bright", base)
print(f"\ncustom preset 'demo_bright': factor {custom.factor}x, count {custom.count()}")

# the stream is ordered and deterministic: 1 worker and 4 workers agree
order = epoch_order(chain, epoch=0, seed=42)
bytes_1 = [it.image.data.tobytes() for it in prefetch_stream(chain, order[:60], workers=1)]
bytes_4 = [it.image.data.tobytes() for it in prefetch_stream(chain, order[:60], workers=4)]
print(f"\nprefetch with 1 vs 4 workers, same 60-item order: identical = {bytes_1 == bytes_4}")
