import concurrent.futures
import logging
import os
from dataclasses import dataclass
from typing import Iterator, List, Optional, Tuple

import numpy as np

from cdan_enhance.core.models.errors import DatasetError, ImageFormatError
from cdan_enhance.data.image_codec import list_images, read_image, resize_bilinear, to_float
from cdan_enhance.engine.tensor import Tensor

logger = logging.getLogger(__name__)

LOW_DIR = "low"
HIGH_DIR = "high"


@dataclass(frozen=True)
class ImagePair:
    """A low-light image and its reference, both 3 x H x W floats in [0, 1]."""

    id: str
    low: np.ndarray
    high: np.ndarray


def _split_root(root: str, split: Optional[str]) -> str:
    base = os.path.join(root, split) if split else root
    for sub in (LOW_DIR, HIGH_DIR):
        if not os.path.isdir(os.path.join(base, sub)):
            raise DatasetError(f"Dataset root {base} has no '{sub}/' directory")
    return base


def match_pairs(low_dir: str, high_dir: str) -> List[str]:
    low_files = list_images(low_dir)
    high_files = list_images(high_dir)
    if not low_files:
        raise DatasetError(f"No PNG images found in {low_dir}")
    if not high_files:
        raise DatasetError(f"No PNG images found in {high_dir}")
    orphans = [os.path.join(low_dir, f) for f in low_files if f not in set(high_files)]
    orphans += [os.path.join(high_dir, f) for f in high_files if f not in set(low_files)]
    if orphans:
        raise DatasetError(f"Unmatched image(s) without a counterpart: {', '.join(orphans)}")
    return low_files


def _load_pair(
    low_dir: str, high_dir: str, filename: str, size: Optional[Tuple[int, int]]
) -> ImagePair:
    low = read_image(os.path.join(low_dir, filename))
    high = read_image(os.path.join(high_dir, filename))
    if size is not None:
        low = resize_bilinear(low, size[0], size[1])
        high = resize_bilinear(high, size[0], size[1])
    elif low.shape != high.shape:
        raise ImageFormatError(
            f"Pair '{filename}' has mismatched sizes {low.shape} and {high.shape}"
        )
    return ImagePair(
        id=os.path.splitext(filename)[0], low=to_float(low), high=to_float(high)
    )


def load_paired_dataset(
    root: str,
    split: Optional[str] = None,
    size: Optional[Tuple[int, int]] = None,
    workers: int = 4,
) -> List[ImagePair]:
    """Load root[/split]/{low,high}/*.png as pairs in lexicographic order.

    `size` is (height, width); when given, both images are resized bilinearly.
    """
    base = _split_root(root, split)
    low_dir = os.path.join(base, LOW_DIR)
    high_dir = os.path.join(base, HIGH_DIR)
    filenames = match_pairs(low_dir, high_dir)

    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        pairs = list(
            executor.map(lambda f: _load_pair(low_dir, high_dir, f, size), filenames)
        )
    logger.info(f"[DataLoader] Loaded {len(pairs)} pairs from {base}.")
    return pairs


def epoch_permutation(num_items: int, seed: int, epoch: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([seed, epoch]))
    return rng.permutation(num_items)


class PairedDataLoader:
    """Seeded mini-batches over a list of pairs.

    Each epoch draws a fresh permutation from (seed, epoch); the trailing
    partial batch is dropped.
    """

    def __init__(self, pairs: List[ImagePair], batch_size: int, seed: int):
        if not pairs:
            raise DatasetError("Dataset is empty")
        if len(pairs) < batch_size:
            raise DatasetError(
                f"Dataset has {len(pairs)} pair(s), fewer than one batch of {batch_size}"
            )
        shapes = {p.low.shape for p in pairs}
        if len(shapes) > 1:
            raise DatasetError(
                f"Batched training needs equal image sizes, got {sorted(shapes)}; "
                "set data.train_size to resize"
            )
        self.pairs = pairs
        self.batch_size = batch_size
        self.seed = seed

    def __len__(self) -> int:
        return len(self.pairs) // self.batch_size

    def batches(self, epoch: int) -> Iterator[Tuple[Tensor, Tensor, List[str]]]:
        order = epoch_permutation(len(self.pairs), self.seed, epoch)
        for b in range(len(self)):
            chosen = [self.pairs[i] for i in order[b * self.batch_size : (b + 1) * self.batch_size]]
            low = Tensor(np.stack([p.low for p in chosen]))
            high = Tensor(np.stack([p.high for p in chosen]))
            yield low, high, [p.id for p in chosen]
