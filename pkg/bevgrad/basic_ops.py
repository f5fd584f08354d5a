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
Elementwise, reduction, layout and linear-algebra primitives.
"""

import builtins
from typing import List, Sequence, Tuple

import numpy as np

from .errors import ShapeError
from .tensor import Primitive, Tensor, TensorLike, as_tensor, is_checked


ACTIVATIONS = ('sigmoid', 'relu', 'silu', 'softplus')


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """
    Sums a broadcast gradient back down to `shape`.
    """
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form never overflows and gives exactly 0.5 at 0
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@Primitive.register
class Add(Primitive):

    name = 'add'

    @staticmethod
    def forward(ctx, a, b):
        ctx.shapes = a.shape, b.shape
        return a + b

    @staticmethod
    def backward(ctx, grad):
        shape_a, shape_b = ctx.shapes
        return _unbroadcast(grad, shape_a), _unbroadcast(grad, shape_b)

    @classmethod
    def sample(cls, rng):
        return [rng.normal(size=(3, 4)), rng.normal(size=(4,))], {}


@Primitive.register
class Sub(Primitive):

    name = 'sub'

    @staticmethod
    def forward(ctx, a, b):
        ctx.shapes = a.shape, b.shape
        return a - b

    @staticmethod
    def backward(ctx, grad):
        shape_a, shape_b = ctx.shapes
        return _unbroadcast(grad, shape_a), -_unbroadcast(grad, shape_b)

    @classmethod
    def sample(cls, rng):
        return [rng.normal(size=(2, 3)), rng.normal(size=(2, 1))], {}


@Primitive.register
class Mul(Primitive):

    name = 'mul'

    @staticmethod
    def forward(ctx, a, b):
        ctx.a, ctx.b = a, b
        return a * b

    @staticmethod
    def backward(ctx, grad):
        return _unbroadcast(grad * ctx.b, ctx.a.shape), _unbroadcast(grad * ctx.a, ctx.b.shape)

    @classmethod
    def sample(cls, rng):
        return [rng.normal(size=(3, 4)), rng.normal(size=(3, 1))], {}


@Primitive.register
class Scale(Primitive):

    name = 'scale'

    @staticmethod
    def forward(ctx, x, factor=1.0):
        ctx.factor = float(factor)
        return x * ctx.factor

    @staticmethod
    def backward(ctx, grad):
        return (grad * ctx.factor,)

    @classmethod
    def sample(cls, rng):
        return [rng.normal(size=(5,))], {'factor': -1.7}


@Primitive.register
class Sum(Primitive):

    name = 'sum'

    @staticmethod
    def forward(ctx, x, axis=None, keepdims=False):
        ctx.shape, ctx.axis, ctx.keepdims = x.shape, axis, keepdims
        return np.asarray(x.sum(axis=axis, keepdims=keepdims), dtype=np.float64)

    @staticmethod
    def backward(ctx, grad):
        if ctx.axis is not None and not ctx.keepdims:
            axes = ctx.axis if isinstance(ctx.axis, tuple) else (ctx.axis,)
            for axis in sorted(a % len(ctx.shape) for a in axes):
                grad = np.expand_dims(grad, axis)
        return (np.broadcast_to(grad, ctx.shape).copy(),)

    @classmethod
    def sample(cls, rng):
        return [rng.normal(size=(3, 4))], {'axis': 1}


@Primitive.register
class Reshape(Primitive):

    name = 'reshape'

    @staticmethod
    def forward(ctx, x, shape=None):
        ctx.shape = x.shape
        return x.reshape(shape)

    @staticmethod
    def backward(ctx, grad):
        return (grad.reshape(ctx.shape),)

    @classmethod
    def sample(cls, rng):
        return [rng.normal(size=(2, 6))], {'shape': (3, 4)}


@Primitive.register
class Transpose(Primitive):

    name = 'transpose'

    @staticmethod
    def forward(ctx, x, axes=None):
        axes = tuple(reversed(range(x.ndim))) if axes is None else tuple(axes)
        ctx.inverse = tuple(np.argsort(axes))
        return np.ascontiguousarray(x.transpose(axes))

    @staticmethod
    def backward(ctx, grad):
        return (np.ascontiguousarray(grad.transpose(ctx.inverse)),)

    @classmethod
    def sample(cls, rng):
        return [rng.normal(size=(2, 3, 4))], {'axes': (1, 2, 0)}


@Primitive.register
class Concat(Primitive):

    name = 'concat'

    @staticmethod
    def forward(ctx, *arrays, axis=0):
        ctx.axis = axis
        ctx.splits = np.cumsum([a.shape[axis] for a in arrays])[:-1]
        return np.concatenate(arrays, axis=axis)

    @staticmethod
    def backward(ctx, grad):
        return [np.ascontiguousarray(g) for g in np.split(grad, ctx.splits, axis=ctx.axis)]

    @classmethod
    def sample(cls, rng):
        return [rng.normal(size=(2, 3)), rng.normal(size=(1, 3))], {'axis': 0}


@Primitive.register
class Slice(Primitive):
    """
    Basic (non-fancy) indexing; the key is a tuple of slices and integers.
    """

    name = 'slice'

    @staticmethod
    def forward(ctx, x, key=None):
        ctx.shape, ctx.key = x.shape, key
        return np.array(x[key], dtype=np.float64)

    @staticmethod
    def backward(ctx, grad):
        full = np.zeros(ctx.shape)
        full[ctx.key] = grad
        return (full,)

    @classmethod
    def sample(cls, rng):
        return [rng.normal(size=(4, 3))], {'key': (slice(1, 3), slice(None))}


@Primitive.register
class TakeRows(Primitive):
    """
    Gathers rows along axis 0; repeated indices accumulate in backward.
    """

    name = 'take_rows'

    @staticmethod
    def forward(ctx, x, index=None):
        index = np.asarray(index, dtype=np.int64)
        ctx.shape, ctx.index = x.shape, index
        return x[index]

    @staticmethod
    def backward(ctx, grad):
        full = np.zeros(ctx.shape)
        np.add.at(full, ctx.index, grad)
        return (full,)

    @classmethod
    def sample(cls, rng):
        return [rng.normal(size=(3, 2))], {'index': np.array([2, 0, 2, 1])}


@Primitive.register
class MatMul(Primitive):

    name = 'matmul'

    @staticmethod
    def forward(ctx, a, b):
        if is_checked() and (a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]):
            raise ShapeError('matmul expects (N, K) @ (K, M), got {} @ {}'.format(a.shape, b.shape))
        ctx.a, ctx.b = a, b
        return a @ b

    @staticmethod
    def backward(ctx, grad):
        return grad @ ctx.b.T, ctx.a.T @ grad

    @classmethod
    def sample(cls, rng):
        return [rng.normal(size=(3, 2)), rng.normal(size=(2, 4))], {}


@Primitive.register
class Exp(Primitive):

    name = 'exp'

    @staticmethod
    def forward(ctx, x):
        ctx.y = np.exp(x)
        return ctx.y

    @staticmethod
    def backward(ctx, grad):
        return (grad * ctx.y,)

    @classmethod
    def sample(cls, rng):
        return [rng.normal(size=(4,))], {}


@Primitive.register
class Activation(Primitive):

    name = 'activation'

    @staticmethod
    def forward(ctx, x, kind='relu'):
        ctx.kind, ctx.x = kind, x
        if kind == 'sigmoid':
            ctx.y = _sigmoid(x)
            return ctx.y
        if kind == 'relu':
            return np.maximum(x, 0.0)
        if kind == 'silu':
            ctx.s = _sigmoid(x)
            return x * ctx.s
        if kind == 'softplus':
            return np.logaddexp(0.0, x)
        raise ValueError('Unknown activation "{}", expected one of {}'.format(kind, ACTIVATIONS))

    @staticmethod
    def backward(ctx, grad):
        if ctx.kind == 'sigmoid':
            return (grad * ctx.y * (1.0 - ctx.y),)
        if ctx.kind == 'relu':
            return (grad * (ctx.x > 0.0),)
        if ctx.kind == 'silu':
            return (grad * (ctx.s + ctx.x * ctx.s * (1.0 - ctx.s)),)
        return (grad * _sigmoid(ctx.x),)

    @classmethod
    def sample(cls, rng):
        x = rng.normal(size=(5,))
        x[np.abs(x) < 1e-2] = 0.5
        return [x], {'kind': 'silu'}


@Primitive.register
class Softmax(Primitive):

    name = 'softmax'

    @staticmethod
    def forward(ctx, x, axis=-1):
        shifted = np.exp(x - x.max(axis=axis, keepdims=True))
        ctx.y, ctx.axis = shifted / shifted.sum(axis=axis, keepdims=True), axis
        return ctx.y

    @staticmethod
    def backward(ctx, grad):
        y = ctx.y
        return (y * (grad - (grad * y).sum(axis=ctx.axis, keepdims=True)),)

    @classmethod
    def sample(cls, rng):
        return [rng.normal(size=(3, 2, 2))], {'axis': 0}


def add(a: TensorLike, b: TensorLike) -> Tensor:
    return Add.apply(a, b)


def sub(a: TensorLike, b: TensorLike) -> Tensor:
    return Sub.apply(a, b)


def mul(a: TensorLike, b: TensorLike) -> Tensor:
    return Mul.apply(a, b)


def scale(x: TensorLike, factor: float) -> Tensor:
    return Scale.apply(x, factor=factor)


def sum(x: TensorLike, axis=None, keepdims: bool = False) -> Tensor:  # noqa A001
    return Sum.apply(x, axis=axis, keepdims=keepdims)


def mean(x: TensorLike) -> Tensor:
    x = as_tensor(x)
    return scale(sum(x), 1.0 / builtins.max(x.size, 1))


def reshape(x: TensorLike, shape: Sequence[int]) -> Tensor:
    return Reshape.apply(x, shape=tuple(shape))


def transpose(x: TensorLike, axes: Sequence[int] = None) -> Tensor:
    return Transpose.apply(x, axes=None if axes is None else tuple(axes))


def concat(tensors: List[TensorLike], axis: int = 0) -> Tensor:
    if len(tensors) == 1:
        return as_tensor(tensors[0])
    return Concat.apply(*tensors, axis=axis)


def slice_(x: TensorLike, key) -> Tensor:
    if not isinstance(key, tuple):
        key = (key,)
    return Slice.apply(x, key=key)


def take_rows(x: TensorLike, index: np.ndarray) -> Tensor:
    return TakeRows.apply(x, index=index)


def matmul(a: TensorLike, b: TensorLike) -> Tensor:
    return MatMul.apply(a, b)


def exp(x: TensorLike) -> Tensor:
    return Exp.apply(x)


def activation(x: TensorLike, kind: str) -> Tensor:
    """
    Elementwise nonlinearity: 'sigmoid', 'relu', 'silu' or 'softplus'.
    """
    if kind not in ACTIVATIONS:
        raise ValueError('Unknown activation "{}", expected one of {}'.format(kind, ACTIVATIONS))
    return Activation.apply(x, kind=kind)


def sigmoid(x: TensorLike) -> Tensor:
    return activation(x, 'sigmoid')


def relu(x: TensorLike) -> Tensor:
    return activation(x, 'relu')


def silu(x: TensorLike) -> Tensor:
    return activation(x, 'silu')


def softplus(x: TensorLike) -> Tensor:
    return activation(x, 'softplus')


def softmax(x: TensorLike, axis: int = -1) -> Tensor:
    return Softmax.apply(x, axis=axis)


def linear(x: TensorLike, weight: TensorLike, bias: TensorLike = None) -> Tensor:
    """
    Row-wise affine map: x (N, K) @ weight (K, M) + bias (M,).
    """
    out = matmul(x, weight)
    return out if bias is None else add(out, bias)
