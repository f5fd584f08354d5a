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
Index-driven primitives moving rows between sparse sets and dense channel-major grids.
"""

from typing import Tuple

import numpy as np

from .errors import ShapeError
from .tensor import Primitive, Tensor, TensorLike, is_checked


def _check_cells(flat_index: np.ndarray, num_cells: int, unique: bool) -> None:
    if flat_index.size and (flat_index.min() < 0 or flat_index.max() >= num_cells):
        raise ShapeError('Cell index outside a grid of {} cells'.format(num_cells))
    if unique and np.unique(flat_index).size != flat_index.size:
        raise ShapeError('Duplicate cell indices in a scatter')


@Primitive.register
class ScatterToGrid(Primitive):
    """
    Writes rows of (N, C) features into a zeroed (C, Y, X) grid at unique flat cell indices.
    """

    name = 'scatter_to_grid'

    @staticmethod
    def forward(ctx, features, flat_index=None, grid_shape=None):
        channels = grid_shape[0]
        num_cells = int(np.prod(grid_shape[1:]))
        flat_index = np.asarray(flat_index, dtype=np.int64)
        if features.shape != (flat_index.size, channels):
            raise ShapeError('scatter: features {} do not match {} indices x {} channels'
                             .format(features.shape, flat_index.size, channels))
        if is_checked():
            _check_cells(flat_index, num_cells, unique=True)
        ctx.flat_index, ctx.channels = flat_index, channels
        grid = np.zeros((channels, num_cells))
        grid[:, flat_index] = features.T
        return grid.reshape(grid_shape)

    @staticmethod
    def backward(ctx, grad):
        return (np.ascontiguousarray(grad.reshape(ctx.channels, -1)[:, ctx.flat_index].T),)

    @classmethod
    def sample(cls, rng):
        return [rng.normal(size=(3, 2))], {'flat_index': np.array([5, 0, 7]), 'grid_shape': (2, 3, 3)}


@Primitive.register
class GatherFromGrid(Primitive):
    """
    Reads (N, C) rows from a (C, Y, X) grid; repeated indices accumulate in backward.
    """

    name = 'gather_from_grid'

    @staticmethod
    def forward(ctx, grid, flat_index=None):
        flat_index = np.asarray(flat_index, dtype=np.int64)
        flat = grid.reshape(grid.shape[0], -1)
        if is_checked():
            _check_cells(flat_index, flat.shape[1], unique=False)
        ctx.shape, ctx.flat_index = grid.shape, flat_index
        return np.ascontiguousarray(flat[:, flat_index].T)

    @staticmethod
    def backward(ctx, grad):
        full = np.zeros((ctx.shape[0], int(np.prod(ctx.shape[1:]))))
        np.add.at(full, (slice(None), ctx.flat_index), grad.T)
        return (full.reshape(ctx.shape),)

    @classmethod
    def sample(cls, rng):
        return [rng.normal(size=(2, 3, 3))], {'flat_index': np.array([4, 1, 4, 8])}


@Primitive.register
class SegmentMax(Primitive):
    """
    Column-wise maximum of (N, C) rows grouped by segment id into (S, C).

    Ties resolve to the lowest row index; empty segments yield zeros.
    """

    name = 'segment_max'

    @staticmethod
    def forward(ctx, x, segments=None, num_segments=None):
        segments = np.asarray(segments, dtype=np.int64)
        rows, channels = x.shape
        out = np.full((num_segments, channels), -np.inf)
        np.maximum.at(out, segments, x)
        is_max = x == out[segments]
        row_ids = np.where(is_max, np.arange(rows)[:, None], rows)
        winner = np.full((num_segments, channels), rows, dtype=np.int64)
        np.minimum.at(winner, segments, row_ids)
        empty = winner == rows
        out[empty] = 0.0
        ctx.winner, ctx.empty, ctx.shape = winner, empty, x.shape
        return out

    @staticmethod
    def backward(ctx, grad):
        dx = np.zeros(ctx.shape)
        seg_ids, cols = np.nonzero(~ctx.empty)
        dx[ctx.winner[seg_ids, cols], cols] = grad[seg_ids, cols]
        return (dx,)

    @classmethod
    def sample(cls, rng):
        return [rng.normal(size=(5, 2))], {'segments': np.array([0, 1, 0, 2, 1]), 'num_segments': 3}


def scatter_to_grid(features: TensorLike, flat_index: np.ndarray, grid_shape: Tuple[int, int, int]) -> Tensor:
    return ScatterToGrid.apply(features, flat_index=flat_index, grid_shape=tuple(grid_shape))


def gather_from_grid(grid: TensorLike, flat_index: np.ndarray) -> Tensor:
    return GatherFromGrid.apply(grid, flat_index=flat_index)


def segment_max(x: TensorLike, segments: np.ndarray, num_segments: int) -> Tensor:
    return SegmentMax.apply(x, segments=segments, num_segments=int(num_segments))
