import os

import numpy as np
import pytest

from cdan_enhance.core.models.errors import DatasetError, ImageFormatError
from cdan_enhance.data.cdan_dataloader import (
    ImagePair,
    PairedDataLoader,
    epoch_permutation,
    load_paired_dataset,
    match_pairs,
)
from cdan_enhance.data.image_codec import write_image


def _make_dataset(root, names, shape=(6, 8, 3), split=None, seed=0):
    rng = np.random.default_rng(seed)
    base = os.path.join(root, split) if split else root
    for sub in ("low", "high"):
        os.makedirs(os.path.join(base, sub), exist_ok=True)
    for name in names:
        for sub in ("low", "high"):
            write_image(
                os.path.join(base, sub, name), rng.integers(0, 256, shape, dtype=np.uint8)
            )
    return base


def _pairs(n, size=4):
    rng = np.random.default_rng(n)
    return [
        ImagePair(id=f"{i:03d}", low=rng.random((3, size, size)), high=rng.random((3, size, size)))
        for i in range(n)
    ]


def test_load_pairs_in_lexicographic_order(tmp_path):
    _make_dataset(str(tmp_path), ["10.png", "2.png", "1.png"])
    pairs = load_paired_dataset(str(tmp_path), workers=2)
    assert [p.id for p in pairs] == ["1", "10", "2"]
    assert pairs[0].low.shape == (3, 6, 8)
    assert pairs[0].low.dtype == np.float64


def test_load_split_and_resize(tmp_path):
    _make_dataset(str(tmp_path), ["a.png", "b.png"], split="our485")
    pairs = load_paired_dataset(str(tmp_path), split="our485", size=(4, 5))
    assert len(pairs) == 2
    assert pairs[1].high.shape == (3, 4, 5)


def test_orphan_file_is_named(tmp_path):
    base = _make_dataset(str(tmp_path), ["a.png"])
    write_image(os.path.join(base, "low", "orphan.png"), np.zeros((6, 8, 3), dtype=np.uint8))
    with pytest.raises(DatasetError, match="orphan.png"):
        match_pairs(os.path.join(base, "low"), os.path.join(base, "high"))


def test_empty_directory_raises(tmp_path):
    _make_dataset(str(tmp_path), [])
    with pytest.raises(DatasetError, match="No PNG"):
        load_paired_dataset(str(tmp_path))


def test_missing_subdirectory_raises(tmp_path):
    os.makedirs(tmp_path / "low")
    with pytest.raises(DatasetError, match="high"):
        load_paired_dataset(str(tmp_path))


def test_mismatched_pair_sizes_without_resize(tmp_path):
    base = _make_dataset(str(tmp_path), [])
    write_image(os.path.join(base, "low", "x.png"), np.zeros((4, 4, 3), dtype=np.uint8))
    write_image(os.path.join(base, "high", "x.png"), np.zeros((5, 4, 3), dtype=np.uint8))
    with pytest.raises(ImageFormatError, match="x.png"):
        load_paired_dataset(str(tmp_path))


def test_epoch_permutation_is_deterministic():
    first = epoch_permutation(20, seed=42, epoch=3)
    assert np.array_equal(first, epoch_permutation(20, seed=42, epoch=3))
    assert sorted(first.tolist()) == list(range(20))
    assert not np.array_equal(first, epoch_permutation(20, seed=42, epoch=4))


def test_batches_drop_partial_batch():
    loader = PairedDataLoader(_pairs(7), batch_size=3, seed=0)
    batches = list(loader.batches(0))
    assert len(loader) == 2
    assert len(batches) == 2
    low, high, ids = batches[0]
    assert low.shape == (3, 3, 4, 4)
    assert high.shape == (3, 3, 4, 4)
    seen = [i for _, _, batch_ids in batches for i in batch_ids]
    assert len(set(seen)) == 6


def test_batches_follow_epoch_permutation():
    pairs = _pairs(5)
    loader = PairedDataLoader(pairs, batch_size=1, seed=9)
    order = epoch_permutation(5, seed=9, epoch=2)
    ids = [batch_ids[0] for _, _, batch_ids in loader.batches(2)]
    assert ids == [pairs[i].id for i in order]
    low, _, _ = next(loader.batches(2))
    assert np.array_equal(low.data[0], pairs[order[0]].low)


def test_loader_rejects_small_or_empty_datasets():
    with pytest.raises(DatasetError, match="empty"):
        PairedDataLoader([], batch_size=1, seed=0)
    with pytest.raises(DatasetError, match="fewer than one batch"):
        PairedDataLoader(_pairs(2), batch_size=3, seed=0)


def test_loader_rejects_unequal_sizes():
    pairs = _pairs(2, size=4) + _pairs(1, size=5)
    with pytest.raises(DatasetError, match="train_size"):
        PairedDataLoader(pairs, batch_size=1, seed=0)
