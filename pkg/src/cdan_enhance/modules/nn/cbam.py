"""Convolutional block attention: channel gate followed by spatial gate.

    F'  = M_c(F)  * F
    F'' = M_s(F') * F'

M_c is N x C x 1 x 1 and M_s is N x 1 x H x W, both in (0, 1).
"""

import math

import numpy as np

from cdan_enhance.engine import functional as F
from cdan_enhance.engine.tensor import Tensor
from cdan_enhance.modules.nn.layers import Conv2d, Module, check_channels

DEFAULT_REDUCTION = 16
DEFAULT_SPATIAL_KERNEL = 7


class ChannelAttention(Module):
    def __init__(
        self, channels: int, rng: np.random.Generator, reduction: int = DEFAULT_REDUCTION
    ):
        super().__init__()
        self.channels = channels
        # C < r would otherwise leave an empty bottleneck
        self.hidden = max(1, math.ceil(channels / reduction))
        self.fc1 = self.add_module("fc1", Conv2d(channels, self.hidden, 1, rng))
        self.fc2 = self.add_module("fc2", Conv2d(self.hidden, channels, 1, rng))

    def _mlp(self, descriptor: Tensor) -> Tensor:
        return self.fc2(F.relu(self.fc1(descriptor)))

    def forward(self, x: Tensor) -> Tensor:
        check_channels(x, self.channels, "ChannelAttention")
        avg = self._mlp(F.global_avg_pool(x))
        peak = self._mlp(F.global_max_pool(x))
        return F.sigmoid(F.add(avg, peak))


class SpatialAttention(Module):
    def __init__(self, rng: np.random.Generator, kernel_size: int = DEFAULT_SPATIAL_KERNEL):
        super().__init__()
        if kernel_size % 2 == 0:
            raise ValueError(f"Spatial attention kernel must be odd, got {kernel_size}")
        self.conv = self.add_module(
            "conv", Conv2d(2, 1, kernel_size, rng, padding=kernel_size // 2)
        )

    def forward(self, x: Tensor) -> Tensor:
        pooled = F.concat_channels(F.channel_mean(x), F.channel_max(x))
        return F.sigmoid(self.conv(pooled))


class CBAM(Module):
    def __init__(
        self,
        channels: int,
        rng: np.random.Generator,
        reduction: int = DEFAULT_REDUCTION,
        spatial_kernel: int = DEFAULT_SPATIAL_KERNEL,
    ):
        super().__init__()
        self.channels = channels
        self.channel_attention = self.add_module(
            "channel", ChannelAttention(channels, rng, reduction)
        )
        self.spatial_attention = self.add_module(
            "spatial", SpatialAttention(rng, spatial_kernel)
        )

    def forward(self, x: Tensor) -> Tensor:
        refined = F.broadcast_mul(x, self.channel_attention(x))
        return F.broadcast_mul(refined, self.spatial_attention(refined))
