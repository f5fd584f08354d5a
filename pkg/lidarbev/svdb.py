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
Sparse voxel dilation: a foreground mask over the BEV plane decides which empty cells
receive a learnable embedding; the merged voxel sequence is Hilbert-serialized and refined
by one gated scan layer.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from bevgrad import basic_ops
from bevgrad.tensor import Tensor, as_tensor, parameter

from . import geometry
from .errors import ConfigError, GridError
from .geometry import BEVGeometry, DenseBEVGrid, SparseVoxelSet
from .hilbert import sort_by_hilbert
from .modules import ConvHead, Module
from .scan import ScanParams, mamba_layer


logger = logging.getLogger(__name__)

MASK_SOURCES = ('multimodal', 'lidar')
FILL_MODES = ('learnable', 'zero')
MASK_HEAD_PRIOR = -2.0


@dataclass
class ForegroundField:
    """
    Per-cell foreground probability and its thresholded mask; a cell is foreground only
    when its probability is strictly above tau.
    """

    prob: Tensor
    tau: float

    def __post_init__(self):
        self.prob = as_tensor(self.prob)
        if self.prob.ndim != 2:
            raise GridError('Foreground probabilities must be (Y, X), got {}'.format(self.prob.shape))

    @property
    def mask(self) -> np.ndarray:
        return self.prob.data > self.tau

    @property
    def shape(self) -> Tuple[int, int]:
        return self.prob.shape


class DilationEmbedding(Module):
    """
    One trainable feature vector shared by every padded cell.
    """

    def __init__(self, channels: int, rng: np.random.Generator, std: float = 0.1):
        self.embedding = parameter(rng.normal(scale=std, size=channels))

    def rows(self, count: int) -> Tensor:
        return basic_ops.take_rows(basic_ops.reshape(self.embedding, (1, -1)), np.zeros(count, dtype=np.int64))


@dataclass
class DilationResult:
    voxels: SparseVoxelSet
    merged: SparseVoxelSet
    permutation: np.ndarray
    num_dilated: int


def _check_same_grid(first: DenseBEVGrid, second: DenseBEVGrid) -> None:
    if first.features.shape[1:] != second.features.shape[1:]:
        raise GridError('BEV grids differ in extent: {} vs {}'
                        .format(first.features.shape[1:], second.features.shape[1:]))


def predict_foreground(image_bev: Optional[DenseBEVGrid], lidar_bev: DenseBEVGrid, head: ConvHead,
                       tau: float) -> ForegroundField:
    """
    prob = sigmoid(head(concat(image_bev, lidar_bev))); pass `image_bev=None` to condition on
    LiDAR features only.
    """
    inputs = [lidar_bev.features]
    if image_bev is not None:
        _check_same_grid(image_bev, lidar_bev)
        inputs.insert(0, image_bev.features)
    logits = head(basic_ops.concat(inputs, axis=0))
    prob = basic_ops.sigmoid(basic_ops.reshape(logits, logits.shape[1:]))
    return ForegroundField(prob, tau)


def points_in_boxes(x_m: np.ndarray, y_m: np.ndarray, boxes: np.ndarray) -> np.ndarray:
    """
    Tests points against oriented BEV boxes (cx, cy, w, l, yaw); l runs along the heading.

    Returns:
        boolean array shaped like `x_m`, True where a point lies in at least one box
    """
    inside = np.zeros(np.shape(x_m), dtype=bool)
    for cx, cy, width, length, yaw in np.asarray(boxes, dtype=np.float64).reshape(-1, 5):
        dx, dy = x_m - cx, y_m - cy
        along = dx * np.cos(yaw) + dy * np.sin(yaw)
        across = -dx * np.sin(yaw) + dy * np.cos(yaw)
        inside |= (np.abs(along) <= length / 2) & (np.abs(across) <= width / 2)
    return inside


def mask_ground_truth(boxes: np.ndarray, grid: BEVGeometry) -> np.ndarray:
    """
    (Y, X) binary target: 1 where the cell center lies inside a box.
    """
    xs, ys = grid.cell_centers()
    return points_in_boxes(xs, ys, boxes).astype(np.float64)


def dilate_and_refine(voxels: SparseVoxelSet, field: ForegroundField, emb: Optional[DilationEmbedding],
                      scan: ScanParams) -> DilationResult:
    """
    Pads mask-positive empty cells and refines the merged sequence.

    Args:
        voxels: BEV-collapsed voxel set (z = 0) with grid extent (X, Y, 1)
        field: foreground field over the same (Y, X) grid
        emb: shared embedding for padded cells; None fills them with zeros
        scan: weights of the refinement layer

    Returns:
        DilationResult whose `voxels` are Hilbert-ordered and refined, and whose `merged` set
        holds the original voxels followed by the padded ones, before refinement
    """
    width, height = voxels.grid_extent[:2]
    if field.shape != (height, width):
        raise GridError('Foreground field {} does not match voxel grid (Y, X) = {}'
                        .format(field.shape, (height, width)))

    occupied = voxels.coords[:, 1] * width + voxels.coords[:, 0]
    positive = np.flatnonzero(field.mask.reshape(-1))
    new_cells = np.setdiff1d(positive, occupied)
    features = voxels.features
    coords = voxels.coords
    if new_cells.size:
        if emb is not None:
            padded = emb.rows(new_cells.size)
        else:
            padded = np.zeros((new_cells.size, voxels.channels))
        new_coords = np.stack([new_cells % width, new_cells // width, np.zeros_like(new_cells)], axis=1)
        features = basic_ops.concat([features, padded], axis=0)
        coords = np.concatenate([coords, new_coords])
    merged = SparseVoxelSet(features, coords, voxels.grid_extent)
    logger.debug('Dilated %d cells onto %d occupied', new_cells.size, len(voxels))

    if not len(merged):
        logger.warning('Empty voxel set after dilation; skipping refinement')
        return DilationResult(merged, merged, np.zeros(0, dtype=np.int64), 0)

    permutation, ordered = sort_by_hilbert(merged)
    refined = mamba_layer(ordered.features, scan)
    return DilationResult(SparseVoxelSet(refined, ordered.coords, voxels.grid_extent), merged, permutation,
                          int(new_cells.size))


class SVDBlock(Module):
    """
    Mask head, padding embedding and refinement layer of one dilation block.
    """

    def __init__(self, lidar_channels: int, image_channels: int, rng: np.random.Generator, tau: float = 0.4,
                 mask_source: str = 'multimodal', fill: str = 'learnable', hidden: int = 8,
                 state_dim: int = 8, expand: int = 2, use_conv: bool = True, conv_width: int = 4):
        if mask_source not in MASK_SOURCES:
            raise ConfigError('Unknown mask source "{}", expected one of {}'.format(mask_source, MASK_SOURCES))
        if fill not in FILL_MODES:
            raise ConfigError('Unknown fill "{}", expected one of {}'.format(fill, FILL_MODES))
        self.tau, self.mask_source, self.fill = tau, mask_source, fill
        in_channels = lidar_channels + (image_channels if mask_source == 'multimodal' else 0)
        self.mask_head = ConvHead(in_channels, hidden, rng, prior=MASK_HEAD_PRIOR)
        self.embedding = DilationEmbedding(lidar_channels, rng) if fill == 'learnable' else None
        self.scan = ScanParams(lidar_channels, rng, state_dim=state_dim, expand=expand,
                               use_conv=use_conv, conv_width=conv_width)

    def __call__(self, voxels: SparseVoxelSet, lidar_bev: DenseBEVGrid,
                 image_bev: DenseBEVGrid) -> Tuple[DenseBEVGrid, ForegroundField, DilationResult]:
        guidance = image_bev if self.mask_source == 'multimodal' else None
        field = predict_foreground(guidance, lidar_bev, self.mask_head, self.tau)
        result = dilate_and_refine(voxels, field, self.embedding, self.scan)
        dense = geometry.scatter_to_bev(result.voxels, lidar_bev.channels, lidar_bev.geometry)
        return dense, field, result


def occupancy_rows(original: SparseVoxelSet, result: DilationResult) -> List[Tuple[int, int, str]]:
    """
    (x, y, status) per occupied cell after dilation, status 'original' or 'dilated', sorted by (y, x).
    """
    before = original.occupied_cells()
    rows = [(x, y, 'original' if (x, y) in before else 'dilated') for x, y in result.voxels.occupied_cells()]
    return sorted(rows, key=lambda row: (row[1], row[0]))
