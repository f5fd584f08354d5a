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

from bevgrad.tensor import Tensor
from lidarbev.errors import GridError, PipelineError
from lidarbev.geometry import (BEVGeometry, DenseBEVGrid, SparseVoxelSet, VoxelizationConfig, collapse_z,
                                  gather_from_bev, read_point_stream, scatter_to_bev, voxelize, write_point_stream)


@pytest.fixture
def voxel_config():
    return VoxelizationConfig((0.5, 0.5, 0.5), ((-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)))


class TestVoxelization:

    def test_extent(self, voxel_config):
        assert voxel_config.grid_extent == (4, 4, 4)

    def test_non_integral_range_rejected(self):
        with pytest.raises(GridError):
            VoxelizationConfig((0.3, 0.5, 0.5), ((-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)))

    def test_points_in_one_voxel_are_averaged(self, voxel_config):
        points = np.array([[0.1, 0.1, 0.1, 1.0], [0.3, 0.2, 0.1, 3.0]])
        voxels = voxelize(points, voxel_config)
        np.testing.assert_array_equal(voxels.coords, [[2, 2, 2]])
        # mean intensity, then the mean offset from the voxel center at 0.25
        np.testing.assert_allclose(voxels.features.data, [[2.0, -0.05, -0.1, -0.15]], atol=1e-12)

    def test_out_of_range_points_dropped(self, voxel_config):
        points = np.array([[1.0, 0.0, 0.0, 1.0], [0.0, -1.01, 0.0, 1.0], [0.0, 0.0, 0.0, 1.0]])
        voxels = voxelize(points, voxel_config)
        assert len(voxels) == 1

    def test_empty_cloud(self, voxel_config):
        voxels = voxelize(np.zeros((0, 4)), voxel_config)
        assert len(voxels) == 0
        assert voxels.grid_extent == (4, 4, 4)

    def test_lexicographic_order(self, voxel_config, rng):
        points = np.hstack([rng.uniform(-1, 1, size=(200, 3)), rng.uniform(size=(200, 1))])
        voxels = voxelize(points, voxel_config)
        assert np.all(np.diff(voxels.flat_keys()) > 0)

    def test_bad_shape(self, voxel_config):
        with pytest.raises(GridError):
            voxelize(np.zeros((3, 2)), voxel_config)


class TestSparseVoxelSet:

    def test_duplicate_coords_rejected(self):
        with pytest.raises(GridError):
            SparseVoxelSet(np.zeros((2, 1)), [[0, 0, 0], [0, 0, 0]], (2, 2, 1))

    def test_coords_outside_extent_rejected(self):
        with pytest.raises(GridError):
            SparseVoxelSet(np.zeros((1, 1)), [[2, 0, 0]], (2, 2, 1))

    def test_collapse_z_takes_max(self):
        voxels = SparseVoxelSet(np.array([[1.0, 5.0], [4.0, 2.0], [7.0, 7.0]]),
                                [[1, 2, 0], [1, 2, 3], [0, 0, 1]], (2, 3, 4))
        collapsed = collapse_z(voxels)
        assert collapsed.grid_extent == (2, 3, 1)
        found = {tuple(c): tuple(f) for c, f in zip(collapsed.coords.tolist(), collapsed.features.data.tolist())}
        assert found == {(0, 0, 0): (7.0, 7.0), (1, 2, 0): (4.0, 5.0)}


class TestBEV:

    def test_scatter_then_gather(self, rng):
        geometry = BEVGeometry((5, 3), (1.0, 1.0), (0.0, 0.0))
        coords = np.array([[0, 0, 0], [4, 2, 0], [2, 1, 0]])
        features = rng.normal(size=(3, 2))
        grid = scatter_to_bev(SparseVoxelSet(features, coords, (5, 3, 1)), 2, geometry)
        assert grid.features.shape == (2, 3, 5)
        np.testing.assert_array_equal(grid.features.data[:, 2, 4], features[1])
        np.testing.assert_array_equal(gather_from_bev(grid, coords).data, features)
        assert np.count_nonzero(grid.features.data.any(axis=0)) == 3

    def test_scatter_channel_mismatch(self):
        geometry = BEVGeometry((2, 2), (1.0, 1.0), (0.0, 0.0))
        with pytest.raises(GridError):
            scatter_to_bev(SparseVoxelSet(np.zeros((1, 3)), [[0, 0, 0]], (2, 2, 1)), 2, geometry)

    def test_gather_outside_grid(self):
        grid = DenseBEVGrid(Tensor(np.zeros((1, 2, 2))), BEVGeometry((2, 2), (1.0, 1.0), (0.0, 0.0)))
        with pytest.raises(GridError):
            gather_from_bev(grid, np.array([[2, 0]]))

    def test_dense_grid_shape_must_match(self):
        with pytest.raises(GridError):
            DenseBEVGrid(Tensor(np.zeros((1, 4, 2))), BEVGeometry((4, 2), (1.0, 1.0), (0.0, 0.0)))

    def test_cell_of_and_centers(self):
        geometry = BEVGeometry((16, 16), (1.0, 1.0), (-8.0, -8.0))
        ix, iy = geometry.cell_of(np.array([-7.5, 7.99]), np.array([0.0, -8.0]))
        np.testing.assert_array_equal(ix, [0, 15])
        np.testing.assert_array_equal(iy, [8, 0])
        xs, ys = geometry.cell_centers()
        assert xs.shape == (16, 16)
        assert xs[0, 0] == -7.5 and ys[-1, 0] == 7.5

    def test_downsampled(self):
        geometry = BEVGeometry((16, 8), (0.5, 0.5), (-4.0, -2.0))
        half = geometry.downsampled(2)
        assert half == BEVGeometry((8, 4), (1.0, 1.0), (-4.0, -2.0))
        with pytest.raises(GridError):
            geometry.downsampled(3)


class TestPointStream:

    def test_write_then_read(self, tmp_path):
        points = np.array([[1.0, -2.5, 0.25, 0.5], [0.0, 3.0, 1.5, 0.75]])
        path = write_point_stream(tmp_path / 'cloud.bin', points)
        assert path.stat().st_size == 2 * 16
        np.testing.assert_array_equal(read_point_stream(path), points)

    def test_corrupt_stream(self, tmp_path):
        path = tmp_path / 'cloud.bin'
        path.write_bytes(b'\x00' * 18)
        with pytest.raises(PipelineError, match='corrupt'):
            read_point_stream(path)

    def test_fuzzed_stream_voxelizes_only_finite_points_in_range(self, tmp_path, rng, voxel_config):
        in_range = rng.uniform(-1.2, 1.2, size=(200, 4)).astype(np.float32)
        garbage = np.frombuffer(rng.integers(0, 256, size=200 * 16, dtype=np.uint8).tobytes(),
                                dtype='<f4').reshape(200, 4)
        records = np.vstack([in_range, garbage])
        for row, column, value in ((3, 0, np.nan), (4, 1, np.inf), (5, 2, -np.inf), (6, 3, np.nan)):
            records[row, column] = value
        records = records[rng.permutation(len(records))]
        path = tmp_path / 'fuzz.bin'
        path.write_bytes(records.astype('<f4').tobytes())

        points = read_point_stream(path)
        voxels = voxelize(points, voxel_config)
        assert np.all(np.isfinite(voxels.features.data))
        assert np.all((voxels.coords >= 0) & (voxels.coords < voxel_config.grid_extent))
        keep = np.isfinite(points).all(axis=1) & ((points[:, :3] >= -1.0) & (points[:, :3] < 1.0)).all(axis=1)
        expected = {tuple(cell) for cell in np.floor((points[keep, :3] + 1.0) / 0.5).astype(np.int64)}
        assert {tuple(int(v) for v in cell) for cell in voxels.coords} == expected

    def test_rows_need_four_fields(self, tmp_path):
        with pytest.raises(PipelineError):
            write_point_stream(tmp_path / 'cloud.bin', np.zeros((2, 3)))
