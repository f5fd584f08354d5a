# This file is part of lidarbev-desk.
#
# Copyright (C) 2026  lidarbev-desk contributors.
#
# This program is provided to you as free software: you can redistribute it and/or modify it under
# the terms of the GNU General Public License as published by the Free Software Foundation, either
# version 3 of the License, or (at your option) any later version. It is distributed in the hope
# that it will be useful, but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the GNU General Public License for more
# details. You should have received a copy of the GNU General Public License along with this
# program. If not, see https://www.gnu.org/licenses/.

"""
Parameter containers shared by the pipeline blocks.

A `Module` discovers its parameters from its attributes: trainable tensors, child modules
and lists of child modules. Parameter paths are dotted attribute names
(e.g. `stages.0.blocks.1.dcn.weight`) and key checkpoints.
"""

import logging
from typing import Dict, Iterator, List, Mapping, Optional, Tuple

import numpy as np

from bevgrad import basic_ops, nn_ops
from bevgrad.tensor import Tensor, TensorLike, parameter

from .errors import PipelineError


logger = logging.getLogger(__name__)


class Module:

    def named_parameters(self, prefix: str = '') -> Iterator[Tuple[str, Tensor]]:
        for name, value in vars(self).items():
            if name.startswith('_'):
                continue
            if isinstance(value, Tensor):
                if value.requires_grad:
                    yield prefix + name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(prefix + name + '.')
            elif isinstance(value, (list, tuple)):
                for index, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters('{}{}.{}.'.format(prefix, name, index))

    def parameters(self) -> Dict[str, Tensor]:
        return dict(self.named_parameters())

    def num_parameters(self) -> int:
        return sum(p.size for _, p in self.named_parameters())

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {path: p.data.copy() for path, p in self.named_parameters()}

    def load_state_dict(self, state: Mapping[str, np.ndarray]) -> None:
        """
        Copies values into the parameters; every path must be present with a matching shape.
        """
        params = self.parameters()
        missing = sorted(set(params) - set(state))
        unexpected = sorted(set(state) - set(params))
        if missing or unexpected:
            raise PipelineError('State does not match the model: missing {}, unexpected {}'
                                .format(missing, unexpected))
        for path, param in params.items():
            value = np.asarray(state[path], dtype=np.float64)
            if value.shape != param.shape:
                raise PipelineError('Parameter "{}" has shape {}, state holds {}'.format(path, param.shape, value.shape))
            param.data = value.copy()

    def zero_grad(self) -> None:
        for _, param in self.named_parameters():
            param.zero_grad()


def he_normal(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int, gain: float = 1.0) -> np.ndarray:
    return rng.normal(scale=gain * np.sqrt(2.0 / max(fan_in, 1)), size=shape)


class Conv2d(Module):
    """
    Square odd-kernel convolution with 'same' padding.
    """

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int, rng: np.random.Generator,
                 bias: bool = True, zero: bool = False, gain: float = 1.0):
        shape = (out_channels, in_channels, kernel_size, kernel_size)
        data = np.zeros(shape) if zero else he_normal(rng, shape, in_channels * kernel_size ** 2, gain)
        self.weight = parameter(data)
        self.bias = parameter(np.zeros(out_channels)) if bias else None
        self.kernel_size = kernel_size

    def __call__(self, x: TensorLike) -> Tensor:
        return nn_ops.conv2d(x, self.weight, self.bias, stride=1, padding=self.kernel_size // 2)


class Pointwise(Module):
    """
    1x1 convolution over a (C, H, W) map.
    """

    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator,
                 zero: bool = False, gain: float = 1.0):
        shape = (out_channels, in_channels)
        self.weight = parameter(np.zeros(shape) if zero else he_normal(rng, shape, in_channels, gain))
        self.bias = parameter(np.zeros(out_channels))

    def __call__(self, x: TensorLike) -> Tensor:
        return nn_ops.pointwise_conv(x, self.weight, self.bias)


class Linear(Module):
    """
    Row-wise affine map of (N, in) rows; weight stored as (in, out).
    """

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator,
                 bias: bool = True, zero: bool = False, std: Optional[float] = None):
        shape = (in_features, out_features)
        if zero:
            data = np.zeros(shape)
        elif std is not None:
            data = rng.normal(scale=std, size=shape)
        else:
            data = he_normal(rng, shape, in_features)
        self.weight = parameter(data)
        self.bias = parameter(np.zeros(out_features)) if bias else None

    def __call__(self, x: TensorLike) -> Tensor:
        return basic_ops.linear(x, self.weight, self.bias)


class ChannelNorm(Module):
    """
    Layer normalization over the channel axis of a (C, H, W) map.
    """

    def __init__(self, channels: int, eps: float = 1e-5):
        self.gamma = parameter(np.ones(channels))
        self.beta = parameter(np.zeros(channels))
        self.eps = eps

    def __call__(self, x: TensorLike) -> Tensor:
        return nn_ops.channel_layer_norm(x, self.gamma, self.beta, eps=self.eps)


class ConvHead(Module):
    """
    Two 3x3 convolutions with relu between, producing `out_channels` logits.
    """

    def __init__(self, in_channels: int, hidden: int, rng: np.random.Generator, out_channels: int = 1,
                 prior: float = 0.0):
        self.conv1 = Conv2d(in_channels, hidden, 3, rng)
        self.conv2 = Conv2d(hidden, out_channels, 3, rng, gain=0.5)
        self.conv2.bias.data[:] = prior

    def __call__(self, x: TensorLike) -> Tensor:
        return self.conv2(basic_ops.relu(self.conv1(x)))


def parameter_paths(module: Module) -> List[str]:
    return [path for path, _ in module.named_parameters()]
