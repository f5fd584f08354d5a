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
Convolution, pooling, normalization and loss primitives over channel-major maps.
"""

import logging
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .basic_ops import add, matmul, reshape, transpose
from .errors import ShapeError
from .tensor import Primitive, Tensor, TensorLike, as_tensor, is_checked


logger = logging.getLogger(__name__)

PROB_CLAMP = (1e-6, 1.0 - 1e-6)


def conv_output_extent(extent: int, kernel: int, stride: int, padding: int) -> int:
    """
    Returns the output extent of a cross-correlation along one axis.

    Raises:
        ShapeError: when the extent is not exact and checked mode is on
    """
    span = extent + 2 * padding - kernel
    if span < 0:
        raise ShapeError('Kernel {} larger than padded extent {}'.format(kernel, extent + 2 * padding))
    if is_checked() and span % stride:
        raise ShapeError(
            'Non-exact conv output: ({} + 2*{} - {}) is not divisible by stride {}'
            .format(extent, padding, kernel, stride)
        )
    return span // stride + 1


@Primitive.register
class Conv2d(Primitive):
    """
    Zero-padded cross-correlation of x (C, H, W) with w (O, C, kH, kW) plus bias (O,).
    """

    name = 'conv2d'

    @staticmethod
    def forward(ctx, x, w, b, stride=1, padding=0):
        if x.ndim != 3 or w.ndim != 4 or b.shape != (w.shape[0],):
            raise ShapeError('conv2d expects x (C,H,W), w (O,C,kH,kW), b (O,); got {} {} {}'
                             .format(x.shape, w.shape, b.shape))
        if x.shape[0] != w.shape[1]:
            raise ShapeError('conv2d input has {} channels, kernel expects {}'.format(x.shape[0], w.shape[1]))
        kh, kw = w.shape[2:]
        if kh % 2 == 0 or kw % 2 == 0:
            raise ShapeError('conv2d kernels must be odd, got {}x{}'.format(kh, kw))
        if stride < 1 or padding < 0:
            raise ShapeError('conv2d needs stride >= 1 and padding >= 0')
        out_h = conv_output_extent(x.shape[1], kh, stride, padding)
        out_w = conv_output_extent(x.shape[2], kw, stride, padding)

        padded = np.pad(x, ((0, 0), (padding, padding), (padding, padding)))
        windows = sliding_window_view(padded, (kh, kw), axis=(1, 2))
        windows = windows[:, :stride * (out_h - 1) + 1:stride, :stride * (out_w - 1) + 1:stride]
        ctx.windows, ctx.w = windows, w
        ctx.stride, ctx.padding, ctx.padded_shape = stride, padding, padded.shape
        out = np.tensordot(w, windows, axes=([1, 2, 3], [0, 3, 4]))
        return out + b[:, None, None]

    @staticmethod
    def backward(ctx, grad):
        w, s, p = ctx.w, ctx.stride, ctx.padding
        _, _, kh, kw = w.shape
        out_h, out_w = grad.shape[1:]
        dw = np.tensordot(grad, ctx.windows, axes=([1, 2], [1, 2]))
        db = grad.sum(axis=(1, 2))
        dpadded = np.zeros(ctx.padded_shape)
        for i in range(kh):
            for j in range(kw):
                contribution = np.tensordot(w[:, :, i, j], grad, axes=([0], [0]))
                dpadded[:, i:i + s * (out_h - 1) + 1:s, j:j + s * (out_w - 1) + 1:s] += contribution
        height, width = ctx.padded_shape[1] - 2 * p, ctx.padded_shape[2] - 2 * p
        dx = dpadded[:, p:p + height, p:p + width]
        return np.ascontiguousarray(dx), dw, db

    @classmethod
    def sample(cls, rng):
        arrays = [rng.normal(size=(2, 5, 5)), rng.normal(size=(3, 2, 3, 3)), rng.normal(size=(3,))]
        return arrays, {'stride': 2, 'padding': 1}


@Primitive.register
class AvgPool2d(Primitive):

    name = 'avg_pool2d'

    @staticmethod
    def forward(ctx, x, size=2):
        channels, height, width = x.shape
        if height % size or width % size:
            raise ShapeError('avg_pool2d: extents {}x{} not divisible by {}'.format(height, width, size))
        ctx.size = size
        return x.reshape(channels, height // size, size, width // size, size).mean(axis=(2, 4))

    @staticmethod
    def backward(ctx, grad):
        s = ctx.size
        return (np.repeat(np.repeat(grad, s, axis=1), s, axis=2) / (s * s),)

    @classmethod
    def sample(cls, rng):
        return [rng.normal(size=(2, 4, 4))], {'size': 2}


@Primitive.register
class UpsampleNearest(Primitive):

    name = 'upsample_nearest'

    @staticmethod
    def forward(ctx, x, factor=2):
        ctx.factor = factor
        return np.repeat(np.repeat(x, factor, axis=1), factor, axis=2)

    @staticmethod
    def backward(ctx, grad):
        f = ctx.factor
        channels, height, width = grad.shape
        return (grad.reshape(channels, height // f, f, width // f, f).sum(axis=(2, 4)),)

    @classmethod
    def sample(cls, rng):
        return [rng.normal(size=(2, 2, 3))], {'factor': 2}


@Primitive.register
class LayerNorm(Primitive):
    """
    Normalizes over the last axis, then scales by gamma and shifts by beta.
    """

    name = 'layer_norm'

    @staticmethod
    def forward(ctx, x, gamma, beta, eps=1e-5):
        if gamma.shape != (x.shape[-1],) or beta.shape != gamma.shape:
            raise ShapeError('layer_norm: gamma/beta {} {} do not match last extent of {}'
                             .format(gamma.shape, beta.shape, x.shape))
        if eps <= 0:
            raise ValueError('layer_norm eps must be positive')
        centered = x - x.mean(axis=-1, keepdims=True)
        inv_std = 1.0 / np.sqrt((centered ** 2).mean(axis=-1, keepdims=True) + eps)
        ctx.xhat, ctx.inv_std, ctx.gamma = centered * inv_std, inv_std, gamma
        return ctx.xhat * gamma + beta

    @staticmethod
    def backward(ctx, grad):
        xhat = ctx.xhat
        lead = tuple(range(grad.ndim - 1))
        dgamma = (grad * xhat).sum(axis=lead)
        dbeta = grad.sum(axis=lead)
        dxhat = grad * ctx.gamma
        n = xhat.shape[-1]
        dx = ctx.inv_std / n * (
            n * dxhat
            - dxhat.sum(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
        )
        return dx, dgamma, dbeta

    @classmethod
    def sample(cls, rng):
        arrays = [rng.normal(size=(3, 4)), rng.normal(size=(4,)), rng.normal(size=(4,))]
        return arrays, {'eps': 1e-5}


@Primitive.register
class FocalLoss(Primitive):
    """
    Mean of -alpha * (1 - p_t)^gamma * log(p_t) with probabilities clamped to PROB_CLAMP.
    The binary target travels as an attribute.
    """

    name = 'focal_loss'

    @staticmethod
    def forward(ctx, prob, target=None, alpha=0.25, gamma=2.0):
        target = np.asarray(target)
        if target.shape != prob.shape:
            raise ShapeError('focal_loss: target shape {} != prob shape {}'.format(target.shape, prob.shape))
        positive = target > 0.5
        clamped = np.clip(prob, *PROB_CLAMP)
        p_t = np.where(positive, clamped, 1.0 - clamped)
        ctx.p_t, ctx.positive, ctx.alpha, ctx.gamma = p_t, positive, alpha, gamma
        ctx.inside = (prob > PROB_CLAMP[0]) & (prob < PROB_CLAMP[1])
        losses = -alpha * (1.0 - p_t) ** gamma * np.log(p_t)
        return np.asarray(losses.mean())

    @staticmethod
    def backward(ctx, grad):
        p_t, alpha, gamma = ctx.p_t, ctx.alpha, ctx.gamma
        one_minus = 1.0 - p_t
        dloss_dpt = -alpha * (one_minus ** gamma / p_t - gamma * one_minus ** (gamma - 1.0) * np.log(p_t))
        sign = np.where(ctx.positive, 1.0, -1.0)
        dprob = grad * dloss_dpt * sign * ctx.inside / p_t.size
        return (dprob,)

    @classmethod
    def sample(cls, rng):
        prob = rng.uniform(0.05, 0.95, size=(2, 3))
        target = (rng.uniform(size=(2, 3)) > 0.5).astype(np.float64)
        return [prob], {'target': target, 'alpha': 0.25, 'gamma': 2.0}


@Primitive.register
class CausalConv1d(Primitive):
    """
    Depthwise causal convolution along a sequence: x (L, C), w (C, K), b (C,).
    Output t reads inputs t-K+1..t, with zeros before the start.
    """

    name = 'causal_conv1d'

    @staticmethod
    def forward(ctx, x, w, b):
        if x.ndim != 2 or w.shape[0] != x.shape[1] or b.shape != (x.shape[1],):
            raise ShapeError('causal_conv1d expects x (L,C), w (C,K), b (C,); got {} {} {}'
                             .format(x.shape, w.shape, b.shape))
        k = w.shape[1]
        padded = np.pad(x, ((k - 1, 0), (0, 0)))
        windows = sliding_window_view(padded, k, axis=0)
        ctx.windows, ctx.w, ctx.length = windows, w, x.shape[0]
        return (windows * w).sum(axis=-1) + b

    @staticmethod
    def backward(ctx, grad):
        w, length = ctx.w, ctx.length
        k = w.shape[1]
        dw = np.einsum('lc,lck->ck', grad, ctx.windows)
        db = grad.sum(axis=0)
        dpadded = np.zeros((length + k - 1, w.shape[0]))
        for tap in range(k):
            dpadded[tap:tap + length] += grad * w[:, tap]
        return dpadded[k - 1:], dw, db

    @classmethod
    def sample(cls, rng):
        return [rng.normal(size=(5, 2)), rng.normal(size=(2, 3)), rng.normal(size=(2,))], {}


def conv2d(x: TensorLike, weight: TensorLike, bias: Optional[TensorLike] = None,
           stride: int = 1, padding: int = 0) -> Tensor:
    """
    Cross-correlation of a (C, H, W) map with an (O, C, kH, kW) kernel.

    Args:
        x: input map
        weight: kernel, odd spatial extents
        bias: optional (O,) bias, zeros when omitted
        stride: step between output samples
        padding: zero padding on every side

    Returns:
        (O, H', W') map with H' = (H + 2*padding - kH) / stride + 1
    """
    weight = as_tensor(weight)
    if bias is None:
        bias = np.zeros(weight.shape[0])
    return Conv2d.apply(x, weight, bias, stride=stride, padding=padding)


def avg_pool2d(x: TensorLike, size: int = 2) -> Tensor:
    return AvgPool2d.apply(x, size=size)


def upsample_nearest(x: TensorLike, factor: int = 2) -> Tensor:
    if factor == 1:
        return as_tensor(x)
    return UpsampleNearest.apply(x, factor=factor)


def layer_norm(x: TensorLike, gamma: TensorLike, beta: TensorLike, eps: float = 1e-5) -> Tensor:
    return LayerNorm.apply(x, gamma, beta, eps=eps)


def channel_layer_norm(x: TensorLike, gamma: TensorLike, beta: TensorLike, eps: float = 1e-5) -> Tensor:
    """
    Layer norm over the channel axis of a (C, H, W) map, per spatial position.
    """
    moved = transpose(x, (1, 2, 0))
    return transpose(layer_norm(moved, gamma, beta, eps=eps), (2, 0, 1))


def focal_loss(prob: TensorLike, target: np.ndarray, alpha: float = 0.25, gamma: float = 2.0) -> Tensor:
    """
    Binary focal loss averaged over all elements.

    Args:
        prob: predicted foreground probabilities
        target: binary target of the same shape
        alpha: constant weight applied to every element
        gamma: focusing exponent, 0 reduces to scaled binary cross-entropy
    """
    return FocalLoss.apply(prob, target=np.asarray(target, dtype=np.float64), alpha=alpha, gamma=gamma)


def causal_conv1d(x: TensorLike, weight: TensorLike, bias: TensorLike) -> Tensor:
    return CausalConv1d.apply(x, weight, bias)


def pointwise_conv(x: TensorLike, weight: TensorLike, bias: TensorLike = None) -> Tensor:
    """
    1x1 convolution as a matmul: x (C, H, W), weight (O, C).
    """
    x = as_tensor(x)
    channels, height, width = x.shape
    flat = reshape(x, (channels, height * width))
    out = matmul(weight, flat)
    if bias is not None:
        out = add(out, reshape(bias, (-1, 1)))
    return reshape(out, (-1, height, width))
