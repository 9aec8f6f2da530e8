"""CDAN encoder/decoder.

Encoder: four conv blocks at H, H/2, H/4, H/8 with max-pool + dropout between
them; their outputs S1..S4 are the skip features. CBAM refines S4 at the
bottleneck. Dense branches over S1..S3 end in a 1x1 conv + sigmoid and gate
the decoder stage at the matching resolution. Three stride-2 transposed convs
climb back to H, a fourth stride-1 transposed conv narrows the width, and a
final dense block plus 1x1 conv + sigmoid produce the image.
"""

import logging
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from cdan_enhance.core.models.errors import ShapeError
from cdan_enhance.core.models.schema import CdanConfig
from cdan_enhance.engine import functional as F
from cdan_enhance.engine.tensor import Tensor
from cdan_enhance.modules.nn.blocks import ConvBlock, DenseBlock
from cdan_enhance.modules.nn.cbam import CBAM
from cdan_enhance.modules.nn.layers import (
    BatchNorm2d,
    Conv2d,
    ConvTranspose2d,
    Module,
    check_channels,
)

logger = logging.getLogger(__name__)

Capture = Optional[Dict[str, Tensor]]


def pad_to_multiple(x: Tensor, multiple: int = 8) -> Tuple[Tensor, Tuple[int, int]]:
    """Reflect-pad bottom/right so H and W become multiples of `multiple`."""
    if multiple < 1:
        raise ValueError(f"pad multiple must be >= 1, got {multiple}")
    if x.ndim != 4:
        raise ShapeError(f"pad_to_multiple expects N x C x H x W, got {x.shape}")
    h, w = x.shape[2], x.shape[3]
    if h < multiple or w < multiple:
        raise ShapeError(
            f"image {h}x{w} is smaller than the minimum {multiple}x{multiple}"
        )
    pad_h = -h % multiple
    pad_w = -w % multiple
    return F.pad_reflect(x, pad_h, pad_w), (h, w)


def crop_to(x: Tensor, dims: Tuple[int, int]) -> Tensor:
    return F.crop(x, dims[0], dims[1])


class GateBranch(Module):
    """Dense block over a skip feature, squeezed to a sigmoid gate."""

    def __init__(
        self,
        in_channels: int,
        gate_channels: int,
        config: CdanConfig,
        rng: np.random.Generator,
    ):
        super().__init__()
        self.dense = self.add_module(
            "dense",
            DenseBlock(in_channels, rng, config.dense_layers, config.growth_rate),
        )
        self.gate = self.add_module(
            "gate", Conv2d(self.dense.out_channels, gate_channels, 1, rng)
        )

    def forward(self, skip: Tensor) -> Tensor:
        return F.sigmoid(self.gate(self.dense(skip)))


class DecoderStage(Module):
    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        skip_channels: Optional[int],
        config: CdanConfig,
        rng: np.random.Generator,
        kernel_size: int = 4,
        stride: int = 2,
        padding: int = 1,
        attention: bool = True,
    ):
        super().__init__()
        self.deconv = self.add_module(
            "deconv",
            ConvTranspose2d(in_channels, out_channels, kernel_size, rng, stride, padding),
        )
        self.bn = self.add_module("bn", BatchNorm2d(out_channels))
        self.fuse = None
        if skip_channels is not None:
            self.fuse = self.add_module(
                "fuse", Conv2d(out_channels + skip_channels, out_channels, 1, rng)
            )
        self.cbam = None
        if config.use_attention and attention:
            self.cbam = self.add_module(
                "cbam",
                CBAM(out_channels, rng, config.cbam_reduction, config.spatial_kernel),
            )

    def forward(
        self, x: Tensor, skip: Optional[Tensor] = None, gate: Optional[Tensor] = None
    ) -> Tensor:
        y = F.relu(self.bn(self.deconv(x)))
        if self.fuse is not None:
            y = self.fuse(F.concat_channels(y, skip))
        if gate is not None:
            y = F.mul(y, gate)
        if self.cbam is not None:
            y = self.cbam(y)
        return y


class CdanModel(Module):
    def __init__(self, config: CdanConfig, seed: int):
        super().__init__()
        self.config = config
        self.seed = seed
        init_seq, dropout_seq = np.random.SeedSequence(seed).spawn(2)
        rng = np.random.default_rng(init_seq)
        self.dropout_rng = np.random.default_rng(dropout_seq)

        enc = config.encoder_channels
        dec = config.decoder_channels

        self.encoder: List[ConvBlock] = [
            self.add_module(f"encoder.{i}", ConvBlock(enc[i], enc[i + 1], rng))
            for i in range(4)
        ]
        self.bottleneck = None
        if config.use_attention:
            self.bottleneck = self.add_module(
                "bottleneck",
                CBAM(enc[4], rng, config.cbam_reduction, config.spatial_kernel),
            )

        # branches[k] reads S(k+1) and gates the decoder stage at that resolution
        self.branches: List[GateBranch] = []
        if config.use_skips and config.use_dense:
            self.branches = [
                self.add_module(
                    f"branches.{k}", GateBranch(enc[k + 1], dec[3 - k], config, rng)
                )
                for k in range(3)
            ]

        self.decoder: List[DecoderStage] = []
        for i in range(3):
            skip_channels = enc[3 - i] if config.use_skips else None
            self.decoder.append(
                self.add_module(
                    f"decoder.{i}",
                    DecoderStage(dec[i], dec[i + 1], skip_channels, config, rng),
                )
            )
        self.decoder.append(
            self.add_module(
                "decoder.3",
                DecoderStage(dec[3], dec[4], None, config, rng, 3, 1, 1, attention=False),
            )
        )

        head_channels = dec[4]
        self.head_dense = None
        if config.use_dense:
            self.head_dense = self.add_module(
                "head.dense",
                DenseBlock(dec[4], rng, config.dense_layers, config.growth_rate),
            )
            head_channels = self.head_dense.out_channels
        self.head_out = self.add_module(
            "head.out", Conv2d(head_channels, config.out_channels, 1, rng)
        )

    def _down(self, x: Tensor) -> Tensor:
        pooled = F.max_pool2d(x, 2, 2)
        return F.dropout(pooled, self.config.dropout, self.training, self.dropout_rng)

    def forward(self, x: Tensor, capture: Capture = None) -> Tensor:
        if x.ndim != 4 or 0 in x.shape:
            raise ShapeError(f"CDAN expects a non-empty N x C x H x W input, got {x.shape}")
        check_channels(x, self.config.in_channels, "CdanModel")
        padded, dims = pad_to_multiple(x, self.config.pad_multiple)

        skips = []
        h = padded
        for i, block in enumerate(self.encoder):
            if i > 0:
                h = self._down(h)
            h = block(h)
            skips.append(h)
        bottleneck = self.bottleneck(h) if self.bottleneck is not None else h

        d = bottleneck
        for i, stage in enumerate(self.decoder[:3]):
            k = 2 - i
            skip = skips[k] if self.config.use_skips else None
            gate = self.branches[k](skips[k]) if self.branches else None
            d = stage(d, skip, gate)
            if capture is not None:
                capture[f"decoder.{i}"] = d
        d = self.decoder[3](d)

        if self.head_dense is not None:
            d = self.head_dense(d)
        out = crop_to(F.sigmoid(self.head_out(d)), dims)

        if capture is not None:
            for i, s in enumerate(skips):
                capture[f"s{i + 1}"] = s
            capture["bottleneck"] = bottleneck
            capture["padded"] = padded
        return out


def build_model(config: Union[CdanConfig, dict, None] = None, seed: int = 0) -> CdanModel:
    if config is None:
        config = CdanConfig()
    elif not isinstance(config, CdanConfig):
        config = CdanConfig(**config)
    model = CdanModel(config, seed)
    logger.info(
        f"[Model] Built CDAN with {num_params(model)} parameters (seed {seed})."
    )
    return model


def num_params(model: Module) -> int:
    return int(sum(p.size for p in model.parameters()))
