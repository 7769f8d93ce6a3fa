"""Provider stack tests: preset factors, mixed-radix decomposition, epoch
ordering, and the ordered multithreaded prefetch stream."""
import threading
from collections import Counter

import numpy as np
import pytest
from PIL import Image

from dermpipe.augment import (
    NO_SHUFFLE,
    AugmentChain,
    BrightnessStage,
    DiskImageProvider,
    HFlipStage,
    IdentityStage,
    ImageProvider,
    ListImageProvider,
    ProviderItem,
    Provenance,
    RotationStage,
    SaturationStage,
    StreamError,
    epoch_order,
    is_preset,
    make_preset,
    prefetch_stream,
    preset_names,
    register_preset,
)
from dermpipe.dataset import DatasetIndex
from dermpipe.imaging import ColorSpace, RasterImage, ResizeFilter, hflip, rotate, save_image
from dermpipe.segment import SegmentConfig


def make_base(n=4, size=8, seed=0):
    rng = np.random.default_rng(seed)
    items = [
        (RasterImage(rng.integers(0, 256, (size, size, 3), dtype=np.uint8)), f"class{i % 2}")
        for i in range(n)
    ]
    return ListImageProvider(items)


# --------------------------------------------------------------------------
# Preset factory
# --------------------------------------------------------------------------

@pytest.mark.parametrize("name,factor", [("none", 1), ("hflip", 2), ("hflip_rot4", 8), ("hflip_rot24", 48)])
def test_preset_factors(name, factor):
    base = make_base(100, size=2)
    chain = make_preset(name, base)
    assert chain.factor == factor
    assert chain.count() == 100 * factor


def test_unknown_preset_rejected():
    with pytest.raises(ValueError, match="unknown augmentation preset"):
        make_preset("zoom17", make_base())


def test_preset_registry_queries():
    assert is_preset("hflip_rot24")
    assert not is_preset("nope")
    assert set(preset_names()) >= {"none", "hflip", "hflip_rot4", "hflip_rot24"}


def test_register_custom_preset():
    name = "bright3_test_only"
    register_preset(name, lambda: [BrightnessStage((1.0, 0.8, 1.2))])
    try:
        chain = make_preset(name, make_base(5))
        assert chain.count() == 15
        with pytest.raises(ValueError, match="already registered"):
            register_preset(name, lambda: [])
    finally:
        from dermpipe import augment
        del augment._PRESET_BUILDERS[name]


# --------------------------------------------------------------------------
# Index decomposition
# --------------------------------------------------------------------------

def test_index_zero_is_identity_variant():
    base = make_base(3)
    chain = make_preset("hflip_rot4", base)
    item = chain.get(0)
    assert item.image == base.get(0).image
    assert item.provenance.base_index == 0


def test_hflip_chain_index_five_is_base_two_flipped():
    base = make_base(3)
    chain = make_preset("hflip", base)
    item = chain.get(5)  # 5 = 2*2 + 1
    assert item.provenance.base_index == 2
    assert item.image == hflip(base.get(2).image)
    assert "hflip" in item.provenance.transforms


def test_labels_pass_through_unchanged():
    base = make_base(4)
    chain = make_preset("hflip_rot4", base)
    for index in range(chain.count()):
        item = chain.get(index)
        assert item.label == base.get(item.provenance.base_index).label


def test_base_variants_are_contiguous():
    base = make_base(3)
    chain = make_preset("hflip_rot4", base)
    bases = [chain.get(i).provenance.base_index for i in range(chain.count())]
    assert bases == sorted(bases)


def test_full_sweep_hits_each_base_factor_times():
    base = make_base(4)
    chain = make_preset("hflip_rot4", base)
    counts = Counter(chain.get(i).provenance.base_index for i in range(chain.count()))
    assert counts == {0: 8, 1: 8, 2: 8, 3: 8}


def test_transform_order_follows_stage_order():
    base = make_base(1, size=6, seed=3)
    chain = AugmentChain(base, [HFlipStage(), RotationStage((0, 90))])
    # index digits: hflip most significant; index 3 -> flip then rotate 90
    item = chain.get(3)
    assert item.image == rotate(hflip(base.get(0).image), 90)


def test_out_of_range_rejected():
    chain = make_preset("hflip", make_base(3))
    with pytest.raises(IndexError):
        chain.get(6)
    with pytest.raises(IndexError):
        chain.get(-1)


def test_get_is_deterministic():
    chain = make_preset("hflip_rot24", make_base(2, size=12))
    a = chain.get(37)
    b = chain.get(37)
    assert a.image == b.image


def test_factor_law_over_random_stacks():
    rng = np.random.default_rng(8)
    pool = [
        lambda: HFlipStage(),
        lambda: RotationStage((0, 90, 180)),
        lambda: BrightnessStage((1.0, 0.5)),
        lambda: SaturationStage((1.0, 0.0, 2.0)),
        lambda: IdentityStage(),
    ]
    for _ in range(12):
        depth = int(rng.integers(1, 5))
        stages = [pool[int(rng.integers(len(pool)))]() for _ in range(depth)]
        base = make_base(int(rng.integers(1, 5)), size=4)
        chain = AugmentChain(base, stages)
        expected = base.count()
        for stage in stages:
            expected *= stage.factor
        assert chain.count() == expected
        sweep = Counter(chain.get(i).provenance.base_index for i in range(chain.count()))
        assert all(v == chain.factor for v in sweep.values())


def test_identity_stage_is_transparent():
    base = make_base(3, size=6)
    plain = AugmentChain(base, [HFlipStage(), RotationStage((0, 90))])
    padded = AugmentChain(base, [IdentityStage(), HFlipStage(), IdentityStage(), RotationStage((0, 90)), IdentityStage()])
    assert plain.count() == padded.count()
    for i in range(plain.count()):
        assert plain.get(i).image == padded.get(i).image


def test_chains_nest():
    base = make_base(2, size=6)
    inner = AugmentChain(base, [HFlipStage()])
    outer = AugmentChain(inner, [RotationStage((0, 90))])
    assert outer.count() == 2 * 2 * 2
    item = outer.get(outer.count() - 1)
    assert item.provenance.base_index == 1
    assert item.image == rotate(hflip(base.get(1).image), 90)


def test_stage_validation():
    with pytest.raises(ValueError):
        RotationStage(())
    with pytest.raises(ValueError):
        RotationStage((90, 0))
    with pytest.raises(ValueError):
        BrightnessStage((0.5, 1.0))
    with pytest.raises(ValueError):
        SaturationStage(())


# --------------------------------------------------------------------------
# epoch_order
# --------------------------------------------------------------------------

def test_no_shuffle_sentinel_gives_identity():
    chain = make_preset("hflip", make_base(5))
    assert epoch_order(chain, 0, NO_SHUFFLE) == list(range(10))
    assert epoch_order(chain, 3, NO_SHUFFLE) == list(range(10))


def test_epoch_order_deterministic():
    chain = make_preset("hflip", make_base(20))
    assert epoch_order(chain, 2, 99) == epoch_order(chain, 2, 99)


def test_epoch_order_is_permutation():
    chain = make_preset("hflip_rot4", make_base(7))
    order = epoch_order(chain, 1, 5)
    assert sorted(order) == list(range(chain.count()))


def test_epoch_order_varies_with_seed_and_epoch():
    chain = make_preset("hflip", make_base(50))
    assert epoch_order(chain, 0, 1) != epoch_order(chain, 0, 2)
    assert epoch_order(chain, 0, 1) != epoch_order(chain, 1, 1)


# --------------------------------------------------------------------------
# prefetch_stream
# --------------------------------------------------------------------------

def collect_images(stream):
    out = []
    for item in stream:
        assert not isinstance(item, StreamError), item
        out.append(item.image.data.tobytes())
    return out


def test_stream_delivers_in_order_for_any_worker_count():
    chain = make_preset("hflip_rot4", make_base(25, size=10))
    order = epoch_order(chain, 0, 42)
    reference = collect_images(prefetch_stream(chain, order, workers=1))
    for workers in (2, 8):
        got = collect_images(prefetch_stream(chain, order, workers=workers, capacity=4))
        assert got == reference, workers


def test_stream_respects_bounded_buffer():
    capacity, workers = 2, 3
    produced = []
    lock = threading.Lock()

    class Counting(ImageProvider):
        def __init__(self, inner):
            self.inner = inner

        def count(self):
            return self.inner.count()

        def get(self, index):
            with lock:
                produced.append(index)
            return self.inner.get(index)

    chain = Counting(make_preset("hflip", make_base(30, size=4)))
    delivered = 0
    for _ in prefetch_stream(chain, range(chain.count()), workers=workers, capacity=capacity):
        delivered += 1
        with lock:
            undelivered = len(produced) - delivered
        assert undelivered <= capacity + workers
    assert delivered == chain.count()


def test_stream_isolates_item_failures():
    base = make_base(6, size=4)

    class Flaky(ImageProvider):
        def count(self):
            return base.count()

        def get(self, index):
            if index == 3:
                raise OSError("simulated unreadable file")
            return base.get(index)

        def provenance_of(self, index):
            return Provenance(index, source=f"mem://{index}")

    stream = list(prefetch_stream(Flaky(), range(6), workers=4, capacity=2))
    assert len(stream) == 6
    errors = [s for s in stream if isinstance(s, StreamError)]
    assert len(errors) == 1
    assert stream[3] is errors[0]
    assert errors[0].index == 3
    assert "OSError" in errors[0].message
    assert errors[0].provenance.source == "mem://3"


def test_stream_follows_given_permutation():
    base = make_base(10, size=4)
    order = [7, 1, 3, 9, 0, 2, 8, 4, 6, 5]
    got = [item.provenance.base_index for item in prefetch_stream(base, order, workers=3)]
    assert got == order


def test_stream_empty_order():
    base = make_base(3)
    assert list(prefetch_stream(base, [], workers=2)) == []


def test_stream_order_survives_jittered_production():
    import time

    base = make_base(30, size=4)
    rng = np.random.default_rng(17)
    delays = rng.uniform(0.0, 0.003, base.count())

    class Jittery(ImageProvider):
        def count(self):
            return base.count()

        def get(self, index):
            time.sleep(delays[index])
            return base.get(index)

    order = list(rng.permutation(base.count())) * 5  # 150 items, repeats allowed
    got = [item.provenance.base_index for item in prefetch_stream(Jittery(), order, workers=7, capacity=3)]
    assert got == order


def test_slow_consumer_keeps_buffer_bounded_at_capacity_one():
    import time

    capacity, workers = 1, 4
    produced = []
    lock = threading.Lock()
    base = make_base(12, size=4)

    class Counting(ImageProvider):
        def count(self):
            return base.count()

        def get(self, index):
            with lock:
                produced.append(index)
            return base.get(index)

    delivered = 0
    for _ in prefetch_stream(Counting(), range(12), workers=workers, capacity=capacity):
        delivered += 1
        time.sleep(0.005)  # slow consumer; producers must block, not queue up
        with lock:
            assert len(produced) - delivered <= capacity + workers
    assert delivered == 12


def test_stream_consumer_can_abandon():
    chain = make_preset("hflip", make_base(50, size=4))
    stream = prefetch_stream(chain, range(chain.count()), workers=4, capacity=2)
    for k, _ in enumerate(stream):
        if k == 5:
            break
    # reaching here without hanging is the assertion


def test_stream_validates_arguments():
    base = make_base(2)
    with pytest.raises(ValueError):
        prefetch_stream(base, [0], workers=0)
    with pytest.raises(ValueError):
        prefetch_stream(base, [0], capacity=0)


@pytest.mark.skipif((__import__("os").cpu_count() or 1) < 4, reason="throughput gate needs >= 4 cores")
def test_throughput_scales_with_workers():
    # Coarse gate: per-item wall clock at workers=4 under 0.6x the
    # single-worker time for CPU-bound augmentation (450x450, hflip_rot24).
    import time

    rng = np.random.default_rng(0)
    items = [(RasterImage(rng.integers(0, 256, (450, 450, 3), dtype=np.uint8)), "x") for _ in range(3)]
    chain = make_preset("hflip_rot24", ListImageProvider(items))
    order = list(rng.permutation(chain.count()))[:120]

    def run(workers):
        start = time.perf_counter()
        for _ in prefetch_stream(chain, order, workers=workers, capacity=8):
            pass
        return (time.perf_counter() - start) / len(order)

    run(1)  # warm caches
    single = run(1)
    quad = run(4)
    assert quad < 0.6 * single, f"{quad * 1e3:.1f} ms/item vs {single * 1e3:.1f} ms/item"


# --------------------------------------------------------------------------
# DiskImageProvider
# --------------------------------------------------------------------------

@pytest.fixture
def disk_dataset(tmp_path):
    rng = np.random.default_rng(12)
    records = []
    for k in range(4):
        name = f"img_{k}.png"
        data = rng.integers(0, 256, (20, 16, 3), dtype=np.uint8)
        save_image(RasterImage(data), tmp_path / name)
        records.append((name, "benign" if k % 2 else "malignant"))
    index = DatasetIndex("d", tuple(records), ("benign", "malignant"))
    return tmp_path, index


def test_disk_provider_finishes_to_size_and_space(disk_dataset):
    root, index = disk_dataset
    provider = DiskImageProvider(index, root, img_size=8, resize_filter=ResizeFilter.BILINEAR, color_space=ColorSpace.HSV)
    assert provider.count() == 4
    item = provider.get(1)
    assert (item.image.width, item.image.height) == (8, 8)
    assert item.image.space is ColorSpace.HSV
    assert item.label == "benign"
    assert item.provenance.source.endswith("img_1.png")


def test_disk_provider_native_is_full_resolution(disk_dataset):
    root, index = disk_dataset
    provider = DiskImageProvider(index, root, img_size=8)
    native = provider.get_native(0)
    assert (native.image.width, native.image.height) == (16, 20)


def test_augmentation_happens_before_finishing(disk_dataset):
    # a 15-degree rotation at native resolution then resize differs from
    # resizing first and rotating the small image
    root, index = disk_dataset
    provider = DiskImageProvider(index, root, img_size=8, resize_filter=ResizeFilter.BILINEAR)
    chain = AugmentChain(provider, [RotationStage((0, 15))])
    item = chain.get(1)
    expected = provider.finish(rotate(provider.get_native(0).image, 15))
    assert item.image == expected
    finished_first = rotate(provider.get(0).image, 15)
    assert item.image != finished_first


def test_disk_provider_applies_extended_mask(tmp_path):
    img = RasterImage.constant(10, 10, (200, 150, 100))
    save_image(img, tmp_path / "sample.png")
    mask_dir = tmp_path / "masks"
    mask_dir.mkdir()
    bits = np.zeros((10, 10), dtype=np.uint8)
    bits[4:6, 4:6] = 255
    Image.fromarray(bits, mode="L").save(mask_dir / "sample_mask.png")
    index = DatasetIndex("d", (("sample.png", "benign"), ), ("benign",))
    cfg = SegmentConfig(extension_factor=0.9, mask_dir=mask_dir, background=(1, 2, 3))
    provider = DiskImageProvider(index, tmp_path, img_size=10, segment_cfg=cfg, anomaly_warnings=False)
    out = provider.get(0).image
    assert out.data[5, 5].tolist() == [200, 150, 100]  # lesion kept
    assert out.data[0, 0].tolist() == [1, 2, 3]  # background replaced
    # extension: radius round(0.9 * sqrt(4/pi)) = 1, so (3,4) is inside now
    assert out.data[3, 4].tolist() == [200, 150, 100]
    assert out.data[2, 4].tolist() == [1, 2, 3]


def test_disk_provider_missing_mask_is_an_error(tmp_path):
    save_image(RasterImage.constant(4, 4, 0), tmp_path / "a.png")
    index = DatasetIndex("d", (("a.png", "x"),), ("x",))
    cfg = SegmentConfig(extension_factor=1.0, mask_dir=tmp_path / "masks")
    provider = DiskImageProvider(index, tmp_path, img_size=4, segment_cfg=cfg)
    with pytest.raises(FileNotFoundError):
        provider.get(0)


def test_disk_provider_mask_dimension_mismatch(tmp_path):
    save_image(RasterImage.constant(4, 4, 0), tmp_path / "a.png")
    mask_dir = tmp_path / "masks"
    mask_dir.mkdir()
    Image.fromarray(np.ones((2, 2), dtype=np.uint8), mode="L").save(mask_dir / "a_mask.png")
    index = DatasetIndex("d", (("a.png", "x"),), ("x",))
    provider = DiskImageProvider(index, tmp_path, img_size=4, segment_cfg=SegmentConfig(1.0, mask_dir))
    with pytest.raises(ValueError, match="mask"):
        provider.get(0)


def test_unreadable_file_surfaces_as_stream_error(tmp_path, disk_dataset):
    root, index = disk_dataset
    records = index.records + (("missing.png", "benign"),)
    bad_index = DatasetIndex("d", records, index.classes)
    provider = DiskImageProvider(bad_index, root, img_size=8)
    items = list(prefetch_stream(provider, range(provider.count()), workers=2))
    errors = [i for i in items if isinstance(i, StreamError)]
    assert len(errors) == 1
    assert errors[0].index == 4
    assert "missing.png" in errors[0].provenance.source
    assert len(items) == 5
