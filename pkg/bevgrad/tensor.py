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
Dense 64-bit tensors with tape-recorded reverse-mode differentiation.

Every differentiable kernel is a `Primitive` subclass registered with `Primitive.register`.
A primitive owns a forward over numpy arrays and an analytic backward; `Primitive.apply`
wraps both so that applications made while a `Tape` is active get recorded.

    >>> with Tape():
    ...     y = basic_ops.sum(x * x)
    >>> backward(y)
"""

import logging
import threading
from contextlib import contextmanager
from types import SimpleNamespace
from typing import Dict, List, Optional, Sequence, Tuple, Type, Union

import numpy as np

from .errors import GradientError, NonFiniteError, ShapeError


logger = logging.getLogger(__name__)

_local = threading.local()
_checked = True


def is_checked() -> bool:
    """
    Returns True when shape and finiteness assertions are enabled.
    """
    return _checked


def set_checked(enabled: bool) -> None:
    global _checked
    _checked = bool(enabled)


@contextmanager
def checked_mode(enabled: bool = True):
    """
    Temporarily switches checked mode, restoring the previous value on exit.
    """
    previous = _checked
    set_checked(enabled)
    try:
        yield
    finally:
        set_checked(previous)


def _tape_stack() -> List['Tape']:
    stack = getattr(_local, 'tapes', None)
    if stack is None:
        stack = _local.tapes = []
    return stack


def active_tape() -> Optional['Tape']:
    """
    Returns the innermost tape entered on this thread, or None.
    """
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tensor:
    """
    Row-major float64 value buffer with an optional gradient buffer.
    """

    __slots__ = ('data', 'requires_grad', 'grad', 'name', '_node')

    def __init__(self, data, requires_grad: bool = False, name: str = None, copy: bool = True):
        array = np.array(data, dtype=np.float64) if copy else np.asarray(data, dtype=np.float64)
        self.data: np.ndarray = array
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._node: Optional['Node'] = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._node is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float('nan')

    def detach(self) -> 'Tensor':
        return Tensor(self.data, requires_grad=False, name=self.name)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, grad: np.ndarray = None) -> None:
        backward(self, grad)

    def __len__(self) -> int:
        return self.data.shape[0]

    def __repr__(self) -> str:
        flag = ', requires_grad=True' if self.requires_grad else ''
        label = ' {}'.format(self.name) if self.name else ''
        return 'Tensor{}(shape={}{})'.format(label, self.shape, flag)

    # operator sugar, resolved lazily to avoid a circular import
    def __add__(self, other):
        from . import basic_ops
        return basic_ops.add(self, other)

    def __radd__(self, other):
        from . import basic_ops
        return basic_ops.add(other, self)

    def __sub__(self, other):
        from . import basic_ops
        return basic_ops.sub(self, other)

    def __rsub__(self, other):
        from . import basic_ops
        return basic_ops.sub(other, self)

    def __mul__(self, other):
        from . import basic_ops
        return basic_ops.mul(self, other)

    def __rmul__(self, other):
        from . import basic_ops
        return basic_ops.mul(other, self)

    def __neg__(self):
        from . import basic_ops
        return basic_ops.scale(self, -1.0)

    def __matmul__(self, other):
        from . import basic_ops
        return basic_ops.matmul(self, other)

    def __getitem__(self, key):
        from . import basic_ops
        return basic_ops.slice_(self, key)

    def reshape(self, *shape):
        from . import basic_ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return basic_ops.reshape(self, shape)

    def transpose(self, *axes):
        from . import basic_ops
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return basic_ops.transpose(self, axes or None)

    def sum(self, axis=None, keepdims=False):
        from . import basic_ops
        return basic_ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self):
        from . import basic_ops
        return basic_ops.mean(self)


TensorLike = Union[Tensor, np.ndarray, float, int, Sequence]


def as_tensor(value: TensorLike) -> Tensor:
    """
    Wraps arrays and scalars as constant tensors, passing tensors through.
    """
    if isinstance(value, Tensor):
        return value
    return Tensor(value, requires_grad=False)


def parameter(data, name: str = None) -> Tensor:
    """
    Creates a leaf tensor that collects gradients.
    """
    return Tensor(data, requires_grad=True, name=name)


class Node:
    """
    One recorded primitive application: inputs, output, saved context.
    """

    __slots__ = ('primitive', 'inputs', 'output', 'ctx', 'tape')

    def __init__(self, primitive, inputs, output, ctx, tape):
        self.primitive: Type['Primitive'] = primitive
        self.inputs: List[Tensor] = inputs
        self.output: Tensor = output
        self.ctx: SimpleNamespace = ctx
        self.tape: 'Tape' = tape


class Tape:
    """
    Ordered record of primitive applications.

    Nodes are appended in execution order, which is a topological order of the graph, so
    backward walks the list once in reverse. A tape is consumed by its first backward:
    saved intermediates are released and the recorded outputs become detached.
    """

    def __init__(self):
        self.nodes: List[Node] = []
        self.consumed = False

    def __enter__(self) -> 'Tape':
        if self.consumed:
            raise GradientError('Cannot record onto a tape that has already run backward')
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc_value, traceback) -> None:
        stack = _tape_stack()
        if stack and stack[-1] is self:
            stack.pop()
        else:
            logger.warning('Tape stack out of order on exit; removing tape anyway')
            if self in stack:
                stack.remove(self)

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, node: Node) -> None:
        self.nodes.append(node)

    def backward(self, loss: Tensor, grad: np.ndarray = None) -> None:
        """
        Propagates gradients from `loss` to every reachable leaf with requires_grad.
        Leaf gradients accumulate into `.grad`; intermediates are freed afterwards.
        """
        if self.consumed:
            raise GradientError('Tape already consumed by a previous backward')
        if grad is None:
            if loss.size != 1:
                raise GradientError(
                    'Backward without an explicit gradient needs a scalar loss, got shape {}'
                    .format(loss.shape)
                )
            grad = np.ones_like(loss.data)
        grad = np.asarray(grad, dtype=np.float64)
        if grad.shape != loss.shape:
            raise ShapeError('Seed gradient shape {} != loss shape {}'.format(grad.shape, loss.shape))

        pending: Dict[int, np.ndarray] = {id(loss): grad}
        visited = 0
        for node in reversed(self.nodes):
            out_grad = pending.pop(id(node.output), None)
            if out_grad is None:
                continue
            visited += 1
            in_grads = node.primitive.backward(node.ctx, out_grad)
            for tensor, in_grad in zip(node.inputs, in_grads):
                if in_grad is None or not tensor.requires_grad:
                    continue
                if is_checked() and in_grad.shape != tensor.shape:
                    raise ShapeError(
                        '{} backward produced gradient {} for input {}'
                        .format(node.primitive.name, in_grad.shape, tensor.shape)
                    )
                owner = tensor._node
                if owner is None or owner.tape is not self:
                    tensor.grad = in_grad.copy() if tensor.grad is None else tensor.grad + in_grad
                elif id(tensor) in pending:
                    pending[id(tensor)] = pending[id(tensor)] + in_grad
                else:
                    pending[id(tensor)] = in_grad
        logger.debug('Backward visited %d of %d recorded nodes', visited, len(self.nodes))
        self.release()

    def release(self) -> None:
        """
        Frees saved intermediates and detaches recorded outputs.
        """
        for node in self.nodes:
            node.ctx = None
            node.output._node = None
            node.output.requires_grad = False
        self.nodes = []
        self.consumed = True


def backward(loss: Tensor, grad: np.ndarray = None) -> None:
    """
    Runs reverse-mode differentiation from `loss` over the tape that recorded it.
    """
    node = loss._node
    if node is None:
        raise GradientError('Tensor is detached: it was not produced on an active tape')
    node.tape.backward(loss, grad)


def _assert_finite(array: np.ndarray, primitive: str, role: str) -> None:
    if not np.all(np.isfinite(array)):
        raise NonFiniteError('{} {} contains NaN or Inf'.format(primitive, role))


class Primitive:
    """
    Base for differentiable kernels.

    Subclasses define `name`, `forward(ctx, *arrays, **attrs)` returning the output array,
    `backward(ctx, grad)` returning one gradient (or None) per array input, and `sample(rng)`
    returning a small random instance `(arrays, attrs)` used by gradient checks.
    Non-differentiable operands (indices, masks, geometry) travel as keyword attributes.
    """

    name: str = None
    _primitive_classes: Dict[str, Type['Primitive']] = {}

    @staticmethod
    def forward(ctx: SimpleNamespace, *arrays: np.ndarray, **attrs) -> np.ndarray:
        raise NotImplementedError('The forward() method of a primitive needs to be overriden')

    @staticmethod
    def backward(ctx: SimpleNamespace, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        raise NotImplementedError('The backward() method of a primitive needs to be overriden')

    @classmethod
    def sample(cls, rng: np.random.Generator) -> Tuple[List[np.ndarray], Dict]:
        raise NotImplementedError('{} provides no gradient-check sample'.format(cls.__name__))

    @classmethod
    def apply(cls, *inputs: TensorLike, **attrs) -> Tensor:
        tensors = [as_tensor(value) for value in inputs]
        checked = is_checked()
        if checked:
            for tensor in tensors:
                _assert_finite(tensor.data, cls.name, 'input')
        ctx = SimpleNamespace()
        out = cls.forward(ctx, *[tensor.data for tensor in tensors], **attrs)
        if checked:
            _assert_finite(out, cls.name, 'output')
        result = Tensor(out, copy=False)
        tape = active_tape()
        if tape is not None and any(tensor.requires_grad for tensor in tensors):
            result.requires_grad = True
            node = Node(cls, tensors, result, ctx, tape)
            result._node = node
            tape.record(node)
        return result

    @classmethod
    def register(cls, primitive_cls: Type['Primitive']) -> Type['Primitive']:
        """
        Adds a primitive to the registry that gradient checks iterate over.
        Does not modify the primitive in any way.
        """
        if not primitive_cls.name:
            raise ValueError('Primitive {} needs a name'.format(primitive_cls.__name__))
        if primitive_cls.name in cls._primitive_classes:
            raise ValueError('Primitive "{}" registered twice'.format(primitive_cls.name))
        cls._primitive_classes[primitive_cls.name] = primitive_cls
        return primitive_cls

    @classmethod
    def registered(cls) -> Dict[str, Type['Primitive']]:
        return dict(cls._primitive_classes)
