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
Dense float64 tensors with tape-based reverse-mode differentiation and finite-difference
verification of every registered primitive.
"""

from . import errors
from . import tensor
from . import basic_ops
from . import nn_ops
from . import sparse_ops
from . import gradcheck
from . import optim
from . import snapshot
from ._version import __version__, __version_info__  # noqa F401

from .tensor import (  # noqa F401
    Primitive, Tape, Tensor, as_tensor, backward, checked_mode, is_checked, parameter, set_checked,
)

__all__ = [
    'errors', 'tensor', 'basic_ops', 'nn_ops', 'sparse_ops', 'gradcheck', 'optim', 'snapshot',
    'Primitive', 'Tape', 'Tensor', 'as_tensor', 'backward', 'checked_mode', 'is_checked',
    'parameter', 'set_checked',
]
