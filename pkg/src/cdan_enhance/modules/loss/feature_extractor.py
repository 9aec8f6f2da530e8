"""Frozen VGG19-style feature column for the perceptual loss.

Entries are numbered the way the VGG19 `features` stack is: every conv, ReLU
and max-pool takes one index. Depth d applies entries [0, d).
"""

import logging
import math
from typing import List, Optional, Tuple

import numpy as np

from cdan_enhance.core.models.errors import (
    ExtractorNotInitializedError,
    ShapeError,
    UnknownTensorError,
)
from cdan_enhance.engine import functional as F
from cdan_enhance.engine.tensor import DTYPE, Tensor

logger = logging.getLogger(__name__)

VGG19_LAYOUT = [64, 64, "M", 128, 128, "M", 256, 256, 256, 256, "M",
                512, 512, 512, 512, "M", 512, 512, 512, 512, "M"]  # fmt: skip
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


def vgg19_entries(in_channels: int = 3) -> List[Tuple[str, int, int]]:
    """Expand the layout into (kind, in_channels, out_channels) entries."""
    entries = []
    channels = in_channels
    for item in VGG19_LAYOUT:
        if item == "M":
            entries.append(("pool", channels, channels))
        else:
            entries.append(("conv", channels, item))
            entries.append(("relu", item, item))
            channels = item
    return entries


class FeatureExtractor:
    """Fixed conv/ReLU/pool stack; its weights never receive gradients."""

    def __init__(self, depth: int = 20, normalize_input: bool = False):
        entries = vgg19_entries()
        if not 1 <= depth <= len(entries):
            raise ValueError(f"feature depth must be in [1, {len(entries)}], got {depth}")
        self.depth = depth
        self.normalize_input = normalize_input
        self.entries = entries[:depth]
        self.weights: List[Optional[Tuple[Tensor, Tensor]]] = [None] * depth
        self.initialized = False

    def tensor_names(self) -> List[str]:
        names = []
        for idx, (kind, _, _) in enumerate(self.entries):
            if kind == "conv":
                names += [f"features.{idx}.weight", f"features.{idx}.bias"]
        return names

    def initialize_random(self, seed: int) -> "FeatureExtractor":
        rng = np.random.default_rng(seed)
        for idx, (kind, cin, cout) in enumerate(self.entries):
            if kind != "conv":
                continue
            fan_in = cin * 9
            bound = math.sqrt(6.0 / fan_in)
            weight = rng.uniform(-bound, bound, size=(cout, cin, 3, 3))
            self.weights[idx] = (Tensor(weight), Tensor(np.zeros(cout, dtype=DTYPE)))
        self.initialized = True
        logger.info(
            f"[FeatureExtractor] Random weights (seed {seed}) up to depth {self.depth}."
        )
        return self

    def load_weights(self, tensors: dict) -> "FeatureExtractor":
        for idx, (kind, cin, cout) in enumerate(self.entries):
            if kind != "conv":
                continue
            w_name, b_name = f"features.{idx}.weight", f"features.{idx}.bias"
            for name in (w_name, b_name):
                if name not in tensors:
                    raise UnknownTensorError(f"Weight file lacks tensor '{name}'")
            weight, bias = tensors[w_name], tensors[b_name]
            if weight.shape != (cout, cin, 3, 3) or bias.shape != (cout,):
                raise ShapeError(
                    f"Tensor '{w_name}' has shape {weight.shape}, expected {(cout, cin, 3, 3)}"
                )
            self.weights[idx] = (Tensor(weight), Tensor(bias))
        self.initialized = True
        logger.info(f"[FeatureExtractor] Loaded weights up to depth {self.depth}.")
        return self

    def extract(self, x: Tensor) -> Tensor:
        if not self.initialized:
            raise ExtractorNotInitializedError(
                "Feature extractor has no weights; load a weight file or initialize it"
            )
        h = x
        if self.normalize_input:
            h = F.normalize_channels(h, IMAGENET_MEAN, IMAGENET_STD)
        for idx, (kind, _, _) in enumerate(self.entries):
            if kind == "conv":
                weight, bias = self.weights[idx]
                h = F.conv2d(h, weight, bias, stride=1, padding=1)
            elif kind == "relu":
                h = F.relu(h)
            else:
                h = F.max_pool2d(h, 2, 2)
        return h
