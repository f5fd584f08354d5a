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

import numpy as np
import pytest

from bevgrad import basic_ops
from bevgrad.errors import GradientError, NonFiniteError, ShapeError
from bevgrad.tensor import Tape, Tensor, backward, checked_mode, parameter


class TestBackward:

    def test_sum_gives_ones(self, rng):
        x = parameter(rng.normal(size=(3, 4)))
        with Tape():
            loss = basic_ops.sum(x)
        backward(loss)
        np.testing.assert_array_equal(x.grad, np.ones((3, 4)))

    def test_half_square_gives_identity(self, rng):
        x = parameter(rng.normal(size=(5,)))
        with Tape():
            loss = basic_ops.scale(basic_ops.sum(x * x), 0.5)
        backward(loss)
        np.testing.assert_allclose(x.grad, x.data, rtol=0, atol=1e-15)

    def test_detached_tensor_fails(self):
        loss = basic_ops.sum(parameter(np.ones(3)))  # no tape active
        with pytest.raises(GradientError):
            backward(loss)

    def test_tape_consumed_once(self):
        x = parameter(np.ones(2))
        with Tape() as tape:
            loss = basic_ops.sum(x * x)
        backward(loss)
        with pytest.raises(GradientError):
            tape.backward(loss)
        with pytest.raises(GradientError):
            with tape:
                pass

    def test_intermediates_freed(self):
        x = parameter(np.ones(2))
        with Tape() as tape:
            y = x * x
            loss = basic_ops.sum(y)
        backward(loss)
        assert len(tape) == 0
        assert y.is_leaf and not y.requires_grad
        assert y.grad is None

    def test_gradients_accumulate_over_reuse(self):
        x = parameter(np.array([2.0, -1.0]))
        with Tape():
            loss = basic_ops.sum(x * x + x)
        backward(loss)
        np.testing.assert_array_equal(x.grad, 2 * x.data + 1)

    def test_non_scalar_needs_seed(self):
        x = parameter(np.ones(3))
        with Tape():
            y = x * 2.0
        with pytest.raises(GradientError):
            backward(y)

    def test_explicit_seed(self):
        x = parameter(np.ones(3))
        with Tape():
            y = x * 2.0
        backward(y, np.array([1.0, 0.0, 3.0]))
        np.testing.assert_array_equal(x.grad, [2.0, 0.0, 6.0])


class TestRecording:

    def test_constants_not_recorded(self):
        with Tape() as tape:
            basic_ops.add(np.ones(2), np.ones(2))
        assert len(tape) == 0

    def test_leaf_reading(self):
        t = Tensor([[1.0, 2.0]], name='w')
        assert t.shape == (1, 2)
        assert t.size == 2
        assert t.is_leaf
        assert 'w' in repr(t)

    def test_deterministic_backward(self, rng):
        data = rng.normal(size=(4, 4))
        grads = []
        for _ in range(2):
            x = parameter(data)
            with Tape():
                loss = basic_ops.sum(basic_ops.softmax(basic_ops.matmul(x, x)))
            backward(loss)
            grads.append(x.grad)
        assert np.array_equal(grads[0], grads[1])


class TestCheckedMode:

    def test_nan_input_rejected(self):
        with pytest.raises(NonFiniteError):
            basic_ops.exp(np.array([np.nan]))

    def test_nan_allowed_when_unchecked(self):
        with checked_mode(False):
            out = basic_ops.exp(np.array([np.nan]))
        assert np.isnan(out.data[0])

    def test_overflow_rejected(self):
        with pytest.raises(NonFiniteError):
            basic_ops.exp(np.array([1000.0]))

    def test_matmul_shape_error(self):
        with pytest.raises(ShapeError):
            basic_ops.matmul(np.ones((2, 3)), np.ones((2, 3)))
