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
from bevgrad.tensor import Tape, backward, parameter


class TestActivation:

    def test_sigmoid_symmetry_point(self):
        assert basic_ops.sigmoid(np.array([0.0])).data[0] == 0.5

    def test_relu_clamps(self):
        assert basic_ops.relu(np.array([-3.2])).data[0] == 0.0

    def test_sigmoid_identity(self, rng):
        x = rng.normal(scale=4.0, size=50)
        total = basic_ops.sigmoid(x).data + basic_ops.sigmoid(-x).data
        np.testing.assert_allclose(total, 1.0, atol=1e-15)

    def test_sigmoid_matches_definition(self, rng):
        x = rng.normal(size=20)
        np.testing.assert_allclose(basic_ops.sigmoid(x).data, 1.0 / (1.0 + np.exp(-x)), rtol=1e-14)

    def test_silu_and_softplus(self):
        x = np.array([-2.0, 0.0, 3.0])
        np.testing.assert_allclose(basic_ops.silu(x).data, x / (1.0 + np.exp(-x)), rtol=1e-14)
        np.testing.assert_allclose(basic_ops.softplus(x).data, np.log1p(np.exp(x)), rtol=1e-14)

    def test_softplus_large_input_finite(self):
        assert basic_ops.softplus(np.array([800.0])).data[0] == 800.0

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            basic_ops.activation(np.zeros(2), 'tanh')


class TestReductions:

    def test_softmax_rows_sum_to_one(self, rng):
        out = basic_ops.softmax(rng.normal(size=(6, 5, 4)), axis=0)
        np.testing.assert_allclose(out.data.sum(axis=0), 1.0, atol=1e-12)

    def test_mean(self):
        assert basic_ops.mean(np.arange(4.0)).item() == 1.5

    def test_sum_axis_backward(self, rng):
        x = parameter(rng.normal(size=(2, 3, 4)))
        with Tape():
            loss = basic_ops.sum(basic_ops.sum(x, axis=(0, 2)))
        backward(loss)
        np.testing.assert_array_equal(x.grad, np.ones((2, 3, 4)))


class TestLayout:

    def test_broadcast_add_gradient(self, rng):
        a = parameter(rng.normal(size=(3, 4)))
        b = parameter(rng.normal(size=(4,)))
        with Tape():
            loss = basic_ops.sum(a + b)
        backward(loss)
        np.testing.assert_array_equal(b.grad, np.full(4, 3.0))

    def test_concat_split_gradients(self):
        a = parameter(np.ones((2, 2)))
        b = parameter(np.ones((1, 2)))
        weights = np.arange(6.0).reshape(3, 2)
        with Tape():
            loss = basic_ops.sum(basic_ops.concat([a, b], axis=0) * weights)
        backward(loss)
        np.testing.assert_array_equal(a.grad, weights[:2])
        np.testing.assert_array_equal(b.grad, weights[2:])

    def test_take_rows_accumulates(self):
        x = parameter(np.zeros((3, 2)))
        with Tape():
            loss = basic_ops.sum(basic_ops.take_rows(x, np.array([1, 1, 2])))
        backward(loss)
        np.testing.assert_array_equal(x.grad, [[0, 0], [2, 2], [1, 1]])

    def test_slice_and_transpose(self, rng):
        data = rng.normal(size=(2, 3, 4))
        x = parameter(data)
        with Tape():
            part = x[0, 1:]
            loss = basic_ops.sum(part.transpose(1, 0))
        np.testing.assert_array_equal(part.data, data[0, 1:])
        backward(loss)
        expected = np.zeros((2, 3, 4))
        expected[0, 1:] = 1.0
        np.testing.assert_array_equal(x.grad, expected)

    def test_linear(self, rng):
        x, w, b = rng.normal(size=(3, 2)), rng.normal(size=(2, 5)), rng.normal(size=5)
        np.testing.assert_allclose(basic_ops.linear(x, w, b).data, x @ w + b, rtol=1e-14)
