"""Parameter containers and the primitive layers CDAN is assembled from."""

import math
from collections import OrderedDict
from typing import Dict, Iterator, Optional, Tuple

import numpy as np

from cdan_enhance.core.models.errors import ShapeError, UnknownTensorError
from cdan_enhance.engine import functional as F
from cdan_enhance.engine.functional import RunningStats
from cdan_enhance.engine.tensor import DTYPE, Tensor


class Module:
    """Named, ordered collection of parameters, buffers and child modules.

    Registration order is the iteration order of `named_parameters()` and
    `state_dict()`, so it must not depend on anything but the constructor
    arguments.
    """

    def __init__(self):
        self._parameters: "OrderedDict[str, Tensor]" = OrderedDict()
        self._running: "OrderedDict[str, RunningStats]" = OrderedDict()
        self._children: "OrderedDict[str, Module]" = OrderedDict()
        self.training = True

    def register_parameter(self, name: str, tensor: Tensor) -> Tensor:
        tensor.requires_grad = True
        self._parameters[name] = tensor
        return tensor

    def register_running_stats(self, name: str, stats: RunningStats) -> RunningStats:
        self._running[name] = stats
        return stats

    def add_module(self, name: str, module: "Module") -> "Module":
        self._children[name] = module
        return module

    def children(self) -> Iterator[Tuple[str, "Module"]]:
        return iter(self._children.items())

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for name, p in self._parameters.items():
            yield prefix + name, p
        for child_name, child in self._children.items():
            yield from child.named_parameters(f"{prefix}{child_name}.")

    def parameters(self) -> Iterator[Tensor]:
        for _, p in self.named_parameters():
            yield p

    def named_buffers(self, prefix: str = "") -> Iterator[Tuple[str, np.ndarray]]:
        for name, stats in self._running.items():
            base = f"{prefix}{name}." if name else prefix
            yield f"{base}running_mean", stats.mean
            yield f"{base}running_var", stats.var
        for child_name, child in self._children.items():
            yield from child.named_buffers(f"{prefix}{child_name}.")

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        state = OrderedDict()
        for name, p in self.named_parameters():
            state[name] = p.data
        for name, buf in self.named_buffers():
            state[name] = buf
        return state

    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        for _, child in self._children.items():
            child.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError


def kaiming_uniform(
    shape: Tuple[int, ...], fan_in: int, rng: np.random.Generator
) -> np.ndarray:
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(DTYPE)


def bias_uniform(size: int, fan_in: int, rng: np.random.Generator) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=size).astype(DTYPE)


class Conv2d(Module):
    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        rng: np.random.Generator,
        stride: int = 1,
        padding: int = 0,
        bias: bool = True,
    ):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.stride = stride
        self.padding = padding
        fan_in = in_channels * kernel_size * kernel_size
        self.weight = self.register_parameter(
            "weight",
            Tensor(
                kaiming_uniform(
                    (out_channels, in_channels, kernel_size, kernel_size), fan_in, rng
                )
            ),
        )
        self.bias: Optional[Tensor] = None
        if bias:
            self.bias = self.register_parameter(
                "bias", Tensor(bias_uniform(out_channels, fan_in, rng))
            )

    def forward(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.weight, self.bias, self.stride, self.padding)


class ConvTranspose2d(Module):
    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        rng: np.random.Generator,
        stride: int = 1,
        padding: int = 0,
    ):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.stride = stride
        self.padding = padding
        fan_in = out_channels * kernel_size * kernel_size
        self.weight = self.register_parameter(
            "weight",
            Tensor(
                kaiming_uniform(
                    (in_channels, out_channels, kernel_size, kernel_size), fan_in, rng
                )
            ),
        )
        self.bias = self.register_parameter(
            "bias", Tensor(bias_uniform(out_channels, fan_in, rng))
        )

    def forward(self, x: Tensor) -> Tensor:
        return F.conv_transpose2d(x, self.weight, self.bias, self.stride, self.padding)


class BatchNorm2d(Module):
    def __init__(self, num_channels: int):
        super().__init__()
        self.num_channels = num_channels
        self.gamma = self.register_parameter(
            "gamma", Tensor(np.ones(num_channels, dtype=DTYPE))
        )
        self.beta = self.register_parameter(
            "beta", Tensor(np.zeros(num_channels, dtype=DTYPE))
        )
        self.stats = self.register_running_stats("", RunningStats(num_channels))

    def forward(self, x: Tensor) -> Tensor:
        return F.batch_norm(x, self.gamma, self.beta, self.stats, self.training)


def check_channels(x: Tensor, expected: int, where: str):
    if x.ndim != 4 or x.shape[1] != expected:
        raise ShapeError(
            f"{where} expects {expected} input channels, got input of shape {x.shape}"
        )


def load_state(module: Module, state: Dict[str, np.ndarray]):
    """Copy named arrays into a module; shapes and names must match exactly."""
    own = module.state_dict()
    for name in state:
        if name not in own:
            raise UnknownTensorError(f"Unknown tensor '{name}' for this model")
    for name, target in own.items():
        if name not in state:
            raise UnknownTensorError(f"Tensor '{name}' missing from the state")
        source = state[name]
        if source.shape != target.shape:
            raise ShapeError(
                f"Tensor '{name}' has shape {source.shape}, model expects {target.shape}"
            )
        target[...] = source
