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

from bevgrad import basic_ops, sparse_ops
from bevgrad.errors import ShapeError
from bevgrad.tensor import Tape, backward, parameter


class TestScatterGather:

    def test_empty_scatter(self):
        grid = sparse_ops.scatter_to_grid(np.zeros((0, 2)), np.zeros(0, dtype=int), (2, 3, 4))
        np.testing.assert_array_equal(grid.data, np.zeros((2, 3, 4)))

    def test_round_trip_exact(self, rng):
        features = rng.normal(size=(10, 3))
        index = rng.choice(36, size=10, replace=False)
        grid = sparse_ops.scatter_to_grid(features, index, (3, 6, 6))
        back = sparse_ops.gather_from_grid(grid, index)
        assert np.array_equal(back.data, features)

    def test_duplicate_cells_rejected(self):
        with pytest.raises(ShapeError):
            sparse_ops.scatter_to_grid(np.ones((2, 1)), np.array([3, 3]), (1, 2, 2))

    def test_out_of_grid_rejected(self):
        with pytest.raises(ShapeError):
            sparse_ops.scatter_to_grid(np.ones((1, 1)), np.array([4]), (1, 2, 2))

    def test_gather_backward_accumulates(self):
        grid = parameter(np.zeros((1, 2, 2)))
        with Tape():
            loss = basic_ops.sum(sparse_ops.gather_from_grid(grid, np.array([3, 3, 0])))
        backward(loss)
        np.testing.assert_array_equal(grid.grad, [[[1.0, 0.0], [0.0, 2.0]]])


class TestSegmentMax:

    def test_values_and_empty_segment(self):
        x = np.array([[1.0, 5.0], [3.0, -1.0], [2.0, 0.0]])
        out = sparse_ops.segment_max(x, np.array([0, 0, 2]), 3)
        np.testing.assert_array_equal(out.data, [[3.0, 5.0], [0.0, 0.0], [2.0, 0.0]])

    def test_ties_route_gradient_to_first_row(self):
        x = parameter(np.array([[2.0], [2.0]]))
        with Tape():
            loss = basic_ops.sum(sparse_ops.segment_max(x, np.array([0, 0]), 1))
        backward(loss)
        np.testing.assert_array_equal(x.grad, [[1.0], [0.0]])
