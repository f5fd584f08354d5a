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
from lidarbev.errors import GridError, PipelineError
from lidarbev.geometry import BEVGeometry
from lidarbev.view_transform import (CameraModel, DepthBins, DepthNet, depth_distribution, frustum_cells,
                                        lift_splat, predict_depth_distribution, splat_views)


IMAGE_SIZE = (8, 16)


@pytest.fixture
def camera():
    return CameraModel.looking(0.0, 1.5, 8.0, IMAGE_SIZE)


@pytest.fixture
def bins():
    return DepthBins(1.0, 17.0, 8)


@pytest.fixture
def wide_grid():
    return BEVGeometry((64, 64), (1.0, 1.0), (-32.0, -32.0))


class TestCameraModel:

    def test_point_on_axis_projects_to_center(self, camera):
        uv, depth = camera.project(np.array([[5.0, 0.0, 1.5], [5.0, 1.0, 1.5]]))
        np.testing.assert_allclose(uv[0], [8.0, 4.0], atol=1e-12)
        np.testing.assert_allclose(depth, [5.0, 5.0], atol=1e-12)
        # +y is to the left of a camera looking along +x
        assert uv[1, 0] < 8.0

    def test_singular_intrinsics(self, camera):
        with pytest.raises(PipelineError, match='singular'):
            CameraModel(np.zeros((3, 3)), camera.extrinsics, IMAGE_SIZE)

    def test_non_rigid_extrinsics(self, camera):
        extrinsics = camera.extrinsics.copy()
        extrinsics[:3, :3] *= 2.0
        with pytest.raises(PipelineError, match='rigid'):
            CameraModel(camera.intrinsics, extrinsics, IMAGE_SIZE)

    def test_dict_round_trip(self, camera):
        again = CameraModel.from_dict(camera.to_dict())
        np.testing.assert_array_equal(again.extrinsics, camera.extrinsics)
        np.testing.assert_array_equal(again.intrinsics, camera.intrinsics)
        assert again.image_size == IMAGE_SIZE

    def test_shifted(self, camera):
        moved = camera.shifted(1.0, -2.0)
        np.testing.assert_array_equal(moved.translation, [1.0, -2.0, 1.5])
        np.testing.assert_array_equal(moved.rotation, camera.rotation)


class TestDepthBins:

    def test_centers_and_bins(self, bins):
        np.testing.assert_array_equal(bins.centers(), np.arange(2.0, 17.0, 2.0))
        np.testing.assert_array_equal(bins.bin_of(np.array([1.0, 2.9, 16.99, 17.0, 0.5])), [0, 0, 7, -1, -1])

    @pytest.mark.parametrize('d_min,d_max,num_bins', [(0.0, 10.0, 4), (5.0, 5.0, 4), (1.0, 10.0, 0)])
    def test_invalid(self, d_min, d_max, num_bins):
        with pytest.raises(PipelineError):
            DepthBins(d_min, d_max, num_bins)

    def test_distribution_sums_to_one(self, rng):
        dist = depth_distribution(rng.normal(scale=3.0, size=(8, 4, 5))).data
        np.testing.assert_allclose(dist.sum(axis=0), 1.0, atol=1e-12)

    def test_depth_net(self, rng):
        dist = predict_depth_distribution(rng.normal(size=(4,) + IMAGE_SIZE), DepthNet(4, 6, 8, rng))
        assert dist.shape == (8,) + IMAGE_SIZE


class TestLiftSplat:

    def test_frustum_beyond_grid_dropped(self, camera, bins):
        grid = BEVGeometry((16, 16), (1.0, 1.0), (-8.0, -8.0))
        cells = frustum_cells(camera, bins, grid)
        assert cells.shape == (8,) + IMAGE_SIZE
        assert (cells[-1] == -1).all()
        assert (cells[0] >= 0).all()

    def test_height_range_filter(self, camera, bins, wide_grid):
        assert (frustum_cells(camera, bins, wide_grid, z_range_m=(10.0, 11.0)) == -1).all()

    def test_mass_conserved_inside_grid(self, rng, camera, bins, wide_grid):
        assert (frustum_cells(camera, bins, wide_grid) >= 0).all()
        feat = rng.normal(size=(3,) + IMAGE_SIZE)
        dist = depth_distribution(rng.normal(size=(8,) + IMAGE_SIZE))
        splat = lift_splat(feat, dist, camera, bins, wide_grid).features.data
        np.testing.assert_allclose(splat.sum(axis=(1, 2)), feat.sum(axis=(1, 2)), atol=1e-9)

    def test_splat_lands_ahead_of_camera(self, camera, bins, wide_grid):
        feat = np.ones((1,) + IMAGE_SIZE)
        dist = np.zeros((8,) + IMAGE_SIZE)
        dist[2] = 1.0  # 6 m
        splat = lift_splat(feat, dist, camera, bins, wide_grid).features.data[0]
        rows, cols = np.nonzero(splat)
        xs = wide_grid.origin_m[0] + cols + 0.5
        assert xs.min() > 0.0

    def test_depth_shape_mismatch(self, camera, bins, wide_grid):
        with pytest.raises(GridError):
            lift_splat(np.zeros((1,) + IMAGE_SIZE), np.zeros((7,) + IMAGE_SIZE), camera, bins, wide_grid)

    def test_gradients(self, rng, camera, bins, wide_grid):
        feat = parameter(rng.normal(size=(2,) + IMAGE_SIZE))
        logits = parameter(rng.normal(size=(8,) + IMAGE_SIZE))
        weights = rng.normal(size=(2, 64, 64))
        with Tape():
            splat = lift_splat(feat, depth_distribution(logits), camera, bins, wide_grid).features
            loss = basic_ops.sum(basic_ops.mul(splat, weights))
        backward(loss)
        assert np.any(feat.grad != 0) and np.any(logits.grad != 0)

    def test_views_are_summed(self, rng, camera, bins, wide_grid):
        behind = CameraModel.looking(np.pi, 1.5, 8.0, IMAGE_SIZE)
        feat = rng.normal(size=(2,) + IMAGE_SIZE)
        dist = depth_distribution(rng.normal(size=(8,) + IMAGE_SIZE)).data
        total = splat_views([(feat, dist, camera), (feat, dist, behind)], bins, wide_grid).features.data
        front = lift_splat(feat, dist, camera, bins, wide_grid).features.data
        back = lift_splat(feat, dist, behind, bins, wide_grid).features.data
        np.testing.assert_allclose(total, front + back, atol=1e-12)

    def test_no_views(self, bins, wide_grid):
        with pytest.raises(PipelineError):
            splat_views([], bins, wide_grid)
