import numpy as np

from cdan_enhance.engine import functional as F
from cdan_enhance.engine.tensor import Tensor
from cdan_enhance.modules.nn.layers import BatchNorm2d, Conv2d, Module, check_channels

DEFAULT_DENSE_LAYERS = 4
DEFAULT_GROWTH_RATE = 16


class ConvBlock(Module):
    """3x3 conv -> batch norm -> ReLU, spatial size preserved."""

    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.conv = self.add_module(
            "conv", Conv2d(in_channels, out_channels, 3, rng, stride=1, padding=1)
        )
        self.bn = self.add_module("bn", BatchNorm2d(out_channels))

    def forward(self, x: Tensor) -> Tensor:
        check_channels(x, self.in_channels, "ConvBlock")
        return F.relu(self.bn(self.conv(x)))


class DenseLayer(Module):
    """Pre-activation unit: batch norm -> ReLU -> 3x3 conv producing `growth_rate` maps."""

    def __init__(self, in_channels: int, growth_rate: int, rng: np.random.Generator):
        super().__init__()
        self.in_channels = in_channels
        self.growth_rate = growth_rate
        self.bn = self.add_module("bn", BatchNorm2d(in_channels))
        self.conv = self.add_module(
            "conv", Conv2d(in_channels, growth_rate, 3, rng, stride=1, padding=1)
        )

    def forward(self, x: Tensor) -> Tensor:
        check_channels(x, self.in_channels, "DenseLayer")
        return self.conv(F.relu(self.bn(x)))


class DenseBlock(Module):
    """Each layer sees the concatenation of the block input and every earlier output.

    Output width is in_channels + num_layers * growth_rate.
    """

    def __init__(
        self,
        in_channels: int,
        rng: np.random.Generator,
        num_layers: int = DEFAULT_DENSE_LAYERS,
        growth_rate: int = DEFAULT_GROWTH_RATE,
    ):
        super().__init__()
        if num_layers < 1 or growth_rate < 1:
            raise ValueError(
                f"DenseBlock needs num_layers >= 1 and growth_rate >= 1, got {num_layers}, {growth_rate}"
            )
        self.in_channels = in_channels
        self.growth_rate = growth_rate
        self.layers = [
            self.add_module(
                f"layers.{i}", DenseLayer(in_channels + i * growth_rate, growth_rate, rng)
            )
            for i in range(num_layers)
        ]
        self.out_channels = in_channels + num_layers * growth_rate

    def forward(self, x: Tensor) -> Tensor:
        check_channels(x, self.in_channels, "DenseBlock")
        features = x
        for layer in self.layers:
            features = F.concat_channels(features, layer(features))
        return features
