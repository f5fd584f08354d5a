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
Point clouds to sparse voxels, sparse voxels to dense BEV grids, and back.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from bevgrad import sparse_ops
from bevgrad.tensor import Tensor, as_tensor, is_checked

from .errors import GridError, PipelineError


logger = logging.getLogger(__name__)

POINT_STREAM_DTYPE = np.dtype('<f4')
POINT_STREAM_FIELDS = 4  # x, y, z, intensity


@dataclass(frozen=True)
class VoxelizationConfig:
    voxel_size_m: Tuple[float, float, float]
    range_m: Tuple[Tuple[float, float], Tuple[float, float], Tuple[float, float]]

    def __post_init__(self):
        for size, (low, high) in zip(self.voxel_size_m, self.range_m):
            if size <= 0 or high <= low:
                raise GridError('Voxel sizes must be positive and ranges non-empty: {} {}'
                                .format(self.voxel_size_m, self.range_m))
            cells = (high - low) / size
            if abs(cells - round(cells)) > 1e-9:
                raise GridError('Range {}..{} is not an integral number of {} m voxels'.format(low, high, size))

    @property
    def grid_extent(self) -> Tuple[int, int, int]:
        return tuple(int(round((high - low) / size)) for size, (low, high) in zip(self.voxel_size_m, self.range_m))

    @property
    def mins(self) -> np.ndarray:
        return np.array([low for low, _ in self.range_m])

    @property
    def maxs(self) -> np.ndarray:
        return np.array([high for _, high in self.range_m])


@dataclass
class SparseVoxelSet:
    """
    N feature rows with unique integer (x, y, z) grid coordinates.
    """

    features: Tensor
    coords: np.ndarray
    grid_extent: Tuple[int, int, int]

    def __post_init__(self):
        self.features = as_tensor(self.features)
        self.coords = np.asarray(self.coords, dtype=np.int64).reshape(-1, 3)
        if is_checked():
            self.validate()

    def __len__(self) -> int:
        return self.coords.shape[0]

    @property
    def channels(self) -> int:
        return self.features.shape[1]

    def validate(self) -> None:
        if self.features.ndim != 2 or self.features.shape[0] != self.coords.shape[0]:
            raise GridError('Voxel set has {} feature rows for {} coords'
                            .format(self.features.shape[0], self.coords.shape[0]))
        if len(self) and ((self.coords < 0).any() or (self.coords >= np.array(self.grid_extent)).any()):
            raise GridError('Voxel coords outside grid extent {}'.format(self.grid_extent))
        if np.unique(self.flat_keys()).size != len(self):
            raise GridError('Voxel set contains duplicate coords')

    def flat_keys(self) -> np.ndarray:
        """
        Row-major (x, y, z) keys: the lexicographic order of coordinates.
        """
        _, ny, nz = self.grid_extent
        return (self.coords[:, 0] * ny + self.coords[:, 1]) * nz + self.coords[:, 2]

    def occupied_cells(self) -> set:
        return {(int(x), int(y)) for x, y, _ in self.coords}


@dataclass(frozen=True)
class BEVGeometry:
    """
    Metric placement of an X x Y cell grid; cell (x, y) spans origin + [x, x+1) * cell_size.
    """

    grid_size: Tuple[int, int]
    cell_size_m: Tuple[float, float]
    origin_m: Tuple[float, float]

    @property
    def width(self) -> int:
        return self.grid_size[0]

    @property
    def height(self) -> int:
        return self.grid_size[1]

    @property
    def num_cells(self) -> int:
        return self.width * self.height

    def flat_index(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.asarray(y, dtype=np.int64) * self.width + np.asarray(x, dtype=np.int64)

    def contains(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return (x >= 0) & (x < self.width) & (y >= 0) & (y < self.height)

    def cell_of(self, x_m: np.ndarray, y_m: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        ix = np.floor((np.asarray(x_m) - self.origin_m[0]) / self.cell_size_m[0]).astype(np.int64)
        iy = np.floor((np.asarray(y_m) - self.origin_m[1]) / self.cell_size_m[1]).astype(np.int64)
        return ix, iy

    def cell_centers(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Returns (Y, X) arrays of metric cell-center x and y.
        """
        xs = self.origin_m[0] + (np.arange(self.width) + 0.5) * self.cell_size_m[0]
        ys = self.origin_m[1] + (np.arange(self.height) + 0.5) * self.cell_size_m[1]
        return np.meshgrid(xs, ys)

    def downsampled(self, factor: int) -> 'BEVGeometry':
        if self.width % factor or self.height % factor:
            raise GridError('Grid {} not divisible by {}'.format(self.grid_size, factor))
        return BEVGeometry(
            (self.width // factor, self.height // factor),
            (self.cell_size_m[0] * factor, self.cell_size_m[1] * factor),
            self.origin_m,
        )


@dataclass
class DenseBEVGrid:
    """
    Channel-major (C, Y, X) feature map with its metric geometry.
    """

    features: Tensor
    geometry: BEVGeometry

    def __post_init__(self):
        self.features = as_tensor(self.features)
        expected = (self.geometry.height, self.geometry.width)
        if self.features.ndim != 3 or self.features.shape[1:] != expected:
            raise GridError('BEV features {} do not match grid (Y, X) = {}'.format(self.features.shape, expected))

    @property
    def channels(self) -> int:
        return self.features.shape[0]

    @property
    def extent(self) -> Tuple[int, int]:
        return self.geometry.grid_size


def voxelize(points: np.ndarray, cfg: VoxelizationConfig) -> SparseVoxelSet:
    """
    Bins points into voxels and averages them.

    Args:
        points: (N, 3 + F) rows of x, y, z and a feature vector (e.g. intensity)
        cfg: voxel size and metric range; points outside the range or with non-finite
            values are dropped

    Returns:
        SparseVoxelSet in lexicographic coordinate order; each row holds the mean point
        feature followed by the mean (x, y, z) offset from the voxel center
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] < 3:
        raise GridError('Points must be (N, 3 + F), got {}'.format(points.shape))
    extent = np.array(cfg.grid_extent)
    xyz = points[:, :3]
    sizes = np.array(cfg.voxel_size_m)
    finite = np.isfinite(points).all(axis=1)
    with np.errstate(invalid='ignore'):
        index = np.floor((np.where(finite[:, None], xyz, 0.0) - cfg.mins) / sizes).astype(np.int64)
        inside = finite & ((xyz >= cfg.mins) & (xyz < cfg.maxs) & (index >= 0) & (index < extent)).all(axis=1)
    points, index = points[inside], index[inside]
    if not len(points):
        return SparseVoxelSet(np.zeros((0, points.shape[1])), np.zeros((0, 3), dtype=np.int64), cfg.grid_extent)

    offsets = points[:, :3] - (cfg.mins + (index + 0.5) * sizes)
    values = np.hstack([points[:, 3:], offsets])
    keys = (index[:, 0] * extent[1] + index[:, 1]) * extent[2] + index[:, 2]
    # sort by key, then by value, so the reduction order is independent of input order
    order = np.lexsort(tuple(values[:, ::-1].T) + (keys,))
    keys, values, index = keys[order], values[order], index[order]
    starts = np.flatnonzero(np.r_[True, keys[1:] != keys[:-1]])
    counts = np.diff(np.r_[starts, len(keys)])
    means = np.add.reduceat(values, starts, axis=0) / counts[:, None]
    return SparseVoxelSet(means, index[starts], cfg.grid_extent)


def collapse_z(voxels: SparseVoxelSet) -> SparseVoxelSet:
    """
    Max-pools voxel features over occupied z at each (x, y); output coords have z = 0.
    """
    nx, ny, _ = voxels.grid_extent
    keys = voxels.coords[:, 0] * ny + voxels.coords[:, 1]
    unique, inverse = np.unique(keys, return_inverse=True)
    features = sparse_ops.segment_max(voxels.features, inverse.reshape(-1), unique.size)
    coords = np.stack([unique // ny, unique % ny, np.zeros_like(unique)], axis=1)
    return SparseVoxelSet(features, coords, (nx, ny, 1))


def _bev_flat_index(coords: np.ndarray, geometry: BEVGeometry) -> np.ndarray:
    x, y = coords[:, 0], coords[:, 1]
    if is_checked() and not geometry.contains(x, y).all():
        raise GridError('Voxel coords fall outside the {} BEV grid'.format(geometry.grid_size))
    return geometry.flat_index(x, y)


def scatter_to_bev(voxels: SparseVoxelSet, channels: int, geometry: BEVGeometry) -> DenseBEVGrid:
    """
    Writes BEV-collapsed voxel features into a zero-initialized (C, Y, X) grid.
    """
    if voxels.channels != channels and len(voxels):
        raise GridError('Voxel features have {} channels, expected {}'.format(voxels.channels, channels))
    flat = _bev_flat_index(voxels.coords, geometry)
    features = voxels.features if len(voxels) else np.zeros((0, channels))
    grid = sparse_ops.scatter_to_grid(features, flat, (channels, geometry.height, geometry.width))
    return DenseBEVGrid(grid, geometry)


def gather_from_bev(grid: DenseBEVGrid, coords: np.ndarray) -> Tensor:
    """
    Reads (N, C) rows at the given (x, y[, z]) coordinates of a BEV grid.
    """
    coords = np.asarray(coords, dtype=np.int64).reshape(len(coords), -1)
    return sparse_ops.gather_from_grid(grid.features, _bev_flat_index(coords, grid.geometry))


def read_point_stream(path: Union[str, Path]) -> np.ndarray:
    """
    Reads a flat little-endian f32 stream of x, y, z, intensity records.

    Returns:
        (N, 4) float64 array
    """
    buffer = Path(path).read_bytes()
    record = POINT_STREAM_DTYPE.itemsize * POINT_STREAM_FIELDS
    if len(buffer) % record:
        raise PipelineError('Point stream "{}" is corrupt ({} bytes is not a multiple of {})'
                            .format(path, len(buffer), record))
    return np.frombuffer(buffer, dtype=POINT_STREAM_DTYPE).astype(np.float64).reshape(-1, POINT_STREAM_FIELDS)


def write_point_stream(path: Union[str, Path], points: np.ndarray) -> Path:
    points = np.asarray(points)
    if points.ndim != 2 or points.shape[1] != POINT_STREAM_FIELDS:
        raise PipelineError('Point stream rows must be x, y, z, intensity; got shape {}'.format(points.shape))
    path = Path(path)
    path.write_bytes(points.astype(POINT_STREAM_DTYPE).tobytes())
    return path
