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
from bevgrad.tensor import Tape, Tensor, backward
from lidarbev.errors import ConfigError, GridError
from lidarbev.geometry import BEVGeometry, DenseBEVGrid, SparseVoxelSet, scatter_to_bev
from lidarbev.scan import ScanParams
from lidarbev.svdb import (DilationEmbedding, ForegroundField, SVDBlock, dilate_and_refine, mask_ground_truth,
                              occupancy_rows, points_in_boxes)


@pytest.fixture
def small_scan(rng):
    return ScanParams(2, rng, state_dim=2, expand=1, conv_width=2)


@pytest.fixture
def two_voxels():
    # a 3 x 2 grid with the two left cells of the bottom row occupied
    return SparseVoxelSet(np.array([[1.0, 2.0], [3.0, 4.0]]), [[0, 0, 0], [1, 0, 0]], (3, 2, 1))


class TestForegroundField:

    def test_threshold_is_strict(self):
        field = ForegroundField(Tensor(np.array([[0.4, 0.41], [0.0, 1.0]])), 0.4)
        np.testing.assert_array_equal(field.mask, [[False, True], [False, True]])

    def test_needs_plane(self):
        with pytest.raises(GridError):
            ForegroundField(Tensor(np.zeros((1, 2, 2))), 0.4)


class TestBoxMask:

    def test_oriented_box(self):
        box = np.array([[0.0, 0.0, 1.0, 2.0, 0.0]])
        inside = points_in_boxes(np.array([0.9, 0.0, 0.0]), np.array([0.0, 0.6, 0.4]), box)
        np.testing.assert_array_equal(inside, [True, False, True])
        turned = box.copy()
        turned[0, 4] = np.pi / 2
        np.testing.assert_array_equal(points_in_boxes(np.array([0.0, 0.9]), np.array([0.9, 0.0]), turned),
                                      [True, False])

    def test_no_boxes(self):
        assert not points_in_boxes(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((0, 5))).any()

    def test_ground_truth_cells(self):
        grid = BEVGeometry((4, 4), (1.0, 1.0), (-2.0, -2.0))
        mask = mask_ground_truth(np.array([[0.0, 0.0, 2.0, 2.0, 0.0]]), grid)
        expected = np.zeros((4, 4))
        expected[1:3, 1:3] = 1.0
        np.testing.assert_array_equal(mask, expected)


class TestDilation:

    def _field(self, cells):
        prob = np.zeros((2, 3))
        for x, y in cells:
            prob[y, x] = 0.9
        return ForegroundField(Tensor(prob), 0.4)

    def test_pads_only_empty_foreground_cells(self, rng, two_voxels, small_scan):
        embedding = DilationEmbedding(2, rng)
        result = dilate_and_refine(two_voxels, self._field([(1, 0), (2, 1)]), embedding, small_scan)
        assert result.num_dilated == 1
        assert result.voxels.occupied_cells() == {(0, 0), (1, 0), (2, 1)}
        np.testing.assert_array_equal(result.merged.coords[-1], [2, 1, 0])
        np.testing.assert_array_equal(result.merged.features.data[:2], two_voxels.features.data)
        np.testing.assert_array_equal(result.merged.features.data[2], embedding.embedding.data)
        np.testing.assert_array_equal(result.merged.coords[result.permutation], result.voxels.coords)

    def test_zero_fill(self, two_voxels, small_scan):
        result = dilate_and_refine(two_voxels, self._field([(2, 0)]), None, small_scan)
        np.testing.assert_array_equal(result.merged.features.data[2], [0.0, 0.0])

    def test_background_field_keeps_occupancy(self, rng, two_voxels, small_scan):
        result = dilate_and_refine(two_voxels, self._field([]), DilationEmbedding(2, rng), small_scan)
        assert result.num_dilated == 0
        assert result.voxels.occupied_cells() == two_voxels.occupied_cells()

    def test_empty_input_and_mask(self, rng, small_scan):
        voxels = SparseVoxelSet(np.zeros((0, 2)), np.zeros((0, 3)), (3, 2, 1))
        result = dilate_and_refine(voxels, self._field([]), DilationEmbedding(2, rng), small_scan)
        assert len(result.voxels) == 0 and result.num_dilated == 0

    def test_field_must_match_grid(self, rng, two_voxels, small_scan):
        field = ForegroundField(Tensor(np.zeros((3, 2))), 0.4)
        with pytest.raises(GridError):
            dilate_and_refine(two_voxels, field, DilationEmbedding(2, rng), small_scan)

    def test_embedding_is_trained(self, rng, two_voxels, small_scan):
        embedding = DilationEmbedding(2, rng)
        with Tape():
            result = dilate_and_refine(two_voxels, self._field([(2, 1), (0, 1)]), embedding, small_scan)
            loss = basic_ops.sum(result.voxels.features)
        backward(loss)
        assert embedding.embedding.grad is not None
        assert np.any(embedding.embedding.grad != 0)

    def test_occupancy_rows(self, rng, two_voxels, small_scan):
        result = dilate_and_refine(two_voxels, self._field([(2, 1), (0, 1)]), DilationEmbedding(2, rng), small_scan)
        assert occupancy_rows(two_voxels, result) == [
            (0, 0, 'original'), (1, 0, 'original'), (0, 1, 'dilated'), (2, 1, 'dilated'),
        ]


class TestSVDBlock:

    @pytest.fixture
    def inputs(self, rng, two_voxels):
        geometry = BEVGeometry((3, 2), (1.0, 1.0), (0.0, 0.0))
        lidar = scatter_to_bev(two_voxels, 2, geometry)
        image = DenseBEVGrid(Tensor(rng.normal(size=(3, 2, 3))), geometry)
        return two_voxels, lidar, image

    @pytest.mark.parametrize('mask_source,fill', [('multimodal', 'learnable'), ('lidar', 'zero')])
    def test_forward(self, rng, inputs, mask_source, fill):
        block = SVDBlock(2, 3, rng, mask_source=mask_source, fill=fill, hidden=4, state_dim=2)
        dense, field, result = block(*inputs)
        assert dense.features.shape == (2, 2, 3)
        assert dense.geometry == inputs[1].geometry
        assert field.shape == (2, 3)
        assert np.all((field.prob.data > 0) & (field.prob.data < 1))
        assert {(0, 0), (1, 0)} <= result.voxels.occupied_cells()
        assert (block.embedding is None) == (fill == 'zero')

    def test_lidar_mask_ignores_image(self, rng, inputs):
        block = SVDBlock(2, 3, rng, mask_source='lidar', hidden=4, state_dim=2)
        voxels, lidar, image = inputs
        first = block(voxels, lidar, image)[1].prob.data
        second = block(voxels, lidar, DenseBEVGrid(Tensor(np.zeros((3, 2, 3))), lidar.geometry))[1].prob.data
        np.testing.assert_array_equal(first, second)

    def test_unknown_options(self, rng):
        with pytest.raises(ConfigError):
            SVDBlock(2, 3, rng, mask_source='camera')
        with pytest.raises(ConfigError):
            SVDBlock(2, 3, rng, fill='noise')
