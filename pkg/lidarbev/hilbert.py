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
Hilbert curve serialization of integer grid coordinates.

Uses the transpose-based construction: coordinates are rotated and reflected level by level
into a "transposed" index whose interleaved bits form the curve position. The orientation
is fixed by that construction; the exhaustive adjacency tests over small orders are its
normative definition. Works for any number of dimensions and is vectorized over points.
"""

import logging
from typing import Tuple, Union

import numpy as np

from bevgrad import basic_ops

from .errors import GridError
from .geometry import SparseVoxelSet


logger = logging.getLogger(__name__)

MAX_INDEX_BITS = 62


def _check_order(order: int, dims: int) -> None:
    if order < 1:
        raise GridError('Hilbert order must be >= 1, got {}'.format(order))
    if order * dims > MAX_INDEX_BITS:
        raise GridError('Hilbert index of order {} in {} dims does not fit in 64 bits'.format(order, dims))


def _axes_to_transpose(axes: np.ndarray, order: int) -> np.ndarray:
    x = axes.copy()
    dims = x.shape[0]
    top = 1 << (order - 1)

    q = top
    while q > 1:
        p = q - 1
        for i in range(dims):
            high = (x[i] & q) != 0
            x[0] = np.where(high, x[0] ^ p, x[0])
            swap = np.where(high, 0, (x[0] ^ x[i]) & p)
            x[0] ^= swap
            x[i] ^= swap
        q >>= 1

    # gray encode
    for i in range(1, dims):
        x[i] ^= x[i - 1]
    flip = np.zeros_like(x[0])
    q = top
    while q > 1:
        flip = np.where((x[dims - 1] & q) != 0, flip ^ (q - 1), flip)
        q >>= 1
    x ^= flip
    return x


def _transpose_to_axes(x: np.ndarray, order: int) -> np.ndarray:
    x = x.copy()
    dims = x.shape[0]
    end = 2 << (order - 1)

    # gray decode
    flip = x[dims - 1] >> 1
    for i in range(dims - 1, 0, -1):
        x[i] ^= x[i - 1]
    x[0] ^= flip

    q = 2
    while q != end:
        p = q - 1
        for i in range(dims - 1, -1, -1):
            high = (x[i] & q) != 0
            x[0] = np.where(high, x[0] ^ p, x[0])
            swap = np.where(high, 0, (x[0] ^ x[i]) & p)
            x[0] ^= swap
            x[i] ^= swap
        q <<= 1
    return x


def hilbert_index(coords: Union[np.ndarray, Tuple[int, ...]], order: int) -> Union[np.ndarray, int]:
    """
    Maps integer grid coordinates to positions along a Hilbert curve.

    Args:
        coords: (d,) single coordinate or (N, d) batch, every component in [0, 2^order)
        order: curve refinement level k

    Returns:
        int for a single coordinate, else (N,) int64 positions in [0, 2^(d*k))
    """
    array = np.asarray(coords, dtype=np.int64)
    single = array.ndim == 1
    array = np.atleast_2d(array)
    dims = array.shape[1]
    _check_order(order, dims)
    if array.size and (array.min() < 0 or array.max() >= (1 << order)):
        raise GridError('Coordinate component outside [0, {}) for Hilbert order {}'.format(1 << order, order))

    transposed = _axes_to_transpose(array.T, order)
    index = np.zeros(array.shape[0], dtype=np.int64)
    for bit in range(order - 1, -1, -1):
        for i in range(dims):
            index = (index << 1) | ((transposed[i] >> bit) & 1)
    return int(index[0]) if single else index


def hilbert_coords(index: Union[np.ndarray, int], order: int, dims: int = 2) -> np.ndarray:
    """
    Inverse of `hilbert_index`: (N,) positions to (N, dims) coordinates.
    """
    _check_order(order, dims)
    index = np.atleast_1d(np.asarray(index, dtype=np.int64))
    if index.size and (index.min() < 0 or index.max() >= (1 << (order * dims))):
        raise GridError('Hilbert position outside [0, 2^{})'.format(order * dims))
    transposed = np.zeros((dims, index.size), dtype=np.int64)
    shift = order * dims - 1
    for bit in range(order - 1, -1, -1):
        for i in range(dims):
            transposed[i] |= ((index >> shift) & 1) << bit
            shift -= 1
    return _transpose_to_axes(transposed, order).T


def order_for_extent(extent: Tuple[int, ...]) -> int:
    """
    Smallest order whose 2^order side covers every extent; non-power-of-two grids are padded.
    """
    return max(1, (max(int(e) for e in extent) - 1).bit_length())


def sort_by_hilbert(voxels: SparseVoxelSet) -> Tuple[np.ndarray, SparseVoxelSet]:
    """
    Reorders voxels along the 2D Hilbert curve of the BEV plane (z is ignored).

    Returns:
        (permutation, sorted set) with sorted[i] = voxels[permutation[i]];
        `np.argsort(permutation)` restores the input order
    """
    if not len(voxels):
        return np.zeros(0, dtype=np.int64), voxels
    order = order_for_extent(voxels.grid_extent[:2])
    keys = hilbert_index(voxels.coords[:, :2], order)
    permutation = np.argsort(keys, kind='stable')
    logger.debug('Hilbert-sorted %d voxels at order %d', len(voxels), order)
    features = basic_ops.take_rows(voxels.features, permutation)
    return permutation, SparseVoxelSet(features, voxels.coords[permutation], voxels.grid_extent)
