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
Checks of the discrete geometry: Hilbert serialization, voxelization, BEV scatter and
gather, box masks and the set algebra of sparse voxel dilation.
"""

import itertools
import logging
from typing import List, Tuple

import numpy as np

from bevgrad.tensor import Tensor
from lidarbev.geometry import BEVGeometry, SparseVoxelSet, VoxelizationConfig, gather_from_bev, scatter_to_bev, \
    voxelize
from lidarbev.hilbert import hilbert_coords, hilbert_index
from lidarbev.scan import ScanParams
from lidarbev.svdb import DilationEmbedding, ForegroundField, dilate_and_refine, mask_ground_truth

from bevcheck import oracles
from bevcheck.common import Check
from bevcheck.runners import CheckRunner


logger = logging.getLogger(__name__)


@CheckRunner.register
class CheckHilbertCurve(Check):
    """
    Exhaustive per order: every cell gets a distinct position, positions decode back to
    their cells, and consecutive positions are grid neighbours.
    """

    key = 'hilbertCurve'
    version = (0, 1, 0)

    def run(self) -> List[Tuple]:
        params = self.parameters
        self.failures = []
        for dims, max_order in ((2, params['max_order_2d']), (3, params['max_order_3d'])):
            for order in range(1, int(max_order) + 1):
                side = 1 << order
                count = side ** dims
                label = '{}D order {}'.format(dims, order)
                cells = np.array(list(itertools.product(range(side), repeat=dims)), dtype=np.int64)
                if not oracles.hilbert_is_bijective(hilbert_index(cells, order), count):
                    self.failures.append((label, 'bijection', 'collisions or gaps'))
                walk = hilbert_coords(np.arange(count), order, dims)
                if not np.array_equal(hilbert_index(walk, order), np.arange(count)):
                    self.failures.append((label, 'index(coords(i)) == i', 'mismatch'))
                if not oracles.unit_steps(walk):
                    self.failures.append((label, 'unit steps', 'jump between consecutive cells'))
        return self.failures


@CheckRunner.register
class CheckDilationSetAlgebra(Check):
    """
    After dilation the occupied cells are exactly the input cells plus the cells whose
    foreground probability is strictly above tau; original features come through unchanged
    and padded cells carry the shared embedding.
    """

    key = 'dilationSetAlgebra'
    version = (0, 1, 0)

    def run(self) -> List[Tuple]:
        params = self.parameters
        tau = float(params['tau'])
        rng = self.rng()
        self.failures = []
        channels = 3
        scan_params = ScanParams(channels, rng, state_dim=2, expand=1, conv_width=2)
        embedding = DilationEmbedding(channels, rng)
        for instance in range(params['instances']):
            width, height = rng.integers(2, 9, size=2)
            cells = rng.permutation(width * height)[:rng.integers(0, width * height // 2 + 1)]
            coords = np.stack([cells % width, cells // width, np.zeros_like(cells)], axis=1)
            features = rng.normal(size=(cells.size, channels))
            voxels = SparseVoxelSet(features, coords, (int(width), int(height), 1))
            prob = rng.uniform(size=(height, width))
            # cells sitting exactly on the threshold stay background
            prob.reshape(-1)[rng.integers(0, prob.size, size=2)] = tau
            result = dilate_and_refine(voxels, ForegroundField(Tensor(prob), tau), embedding, scan_params)

            expected = oracles.dilated_cells(voxels.occupied_cells(), prob, tau)
            found = result.voxels.occupied_cells()
            if found != expected:
                self.failures.append(('instance {} occupancy'.format(instance), len(expected),
                                      '{} cells, {} differ'.format(len(found), len(found ^ expected))))
            if result.num_dilated != len(expected) - len(voxels):
                self.failures.append(('instance {} dilated count'.format(instance), len(expected) - len(voxels),
                                      result.num_dilated))
            merged = result.merged
            if not (np.array_equal(merged.features.data[:len(voxels)], features)
                    and np.array_equal(merged.coords[:len(voxels)], voxels.coords)):
                self.failures.append(('instance {} original voxels'.format(instance), 'preserved', 'modified'))
            padded = merged.features.data[len(voxels):]
            if padded.size and not np.array_equal(padded, np.broadcast_to(embedding.embedding.data, padded.shape)):
                self.failures.append(('instance {} padded features'.format(instance), 'shared embedding', 'other'))
            if len(merged) and not np.array_equal(merged.coords[result.permutation], result.voxels.coords):
                self.failures.append(('instance {} permutation'.format(instance), 'sorted = merged[perm]',
                                      'mismatch'))
        return self.failures


@CheckRunner.register
class CheckVoxelizationOracle(Check):
    """
    Voxel coordinates and mean rows against a dictionary accumulation, in lexicographic
    order and independent of the input point order.
    """

    key = 'voxelizationOracle'
    version = (0, 1, 0)

    def run(self) -> List[Tuple]:
        params = self.parameters
        rng = self.rng()
        self.failures = []
        cfg = VoxelizationConfig((0.5, 0.5, 1.0), ((-4.0, 4.0), (-4.0, 4.0), (-1.0, 1.0)))
        for instance in range(params['instances']):
            count = int(params['points'])
            xyz = rng.uniform([-4.5, -4.5, -1.5], [4.5, 4.5, 1.5], size=(count, 3))
            # coarse snapping puts several points into the same voxel
            xyz[:count // 2] = np.round(xyz[:count // 2] * 2.0) / 2.0 + 0.1
            points = np.hstack([xyz, rng.uniform(size=(count, 1))])
            voxels = voxelize(points, cfg)
            expected = oracles.voxel_means(points, cfg.voxel_size_m, cfg.range_m)
            label = 'instance {}'.format(instance)

            found = {tuple(int(v) for v in coord): row for coord, row in zip(voxels.coords, voxels.features.data)}
            if set(found) != set(expected):
                self.failures.append((label + ' voxels', len(expected), len(found)))
                continue
            diff = max((float(np.abs(found[key] - expected[key]).max()) for key in expected), default=0.0)
            if diff > params['tolerance']:
                self.failures.append((label + ' means', '<= {:g}'.format(params['tolerance']), diff))
            if np.any(np.diff(voxels.flat_keys()) <= 0):
                self.failures.append((label + ' order', 'lexicographic', 'unsorted'))
            shuffled = voxelize(points[rng.permutation(count)], cfg)
            if not (np.array_equal(shuffled.coords, voxels.coords)
                    and np.array_equal(shuffled.features.data, voxels.features.data)):
                self.failures.append((label + ' point order', 'bit-identical', 'differs'))
        return self.failures


@CheckRunner.register
class CheckScatterRoundTrip(Check):

    key = 'scatterRoundTrip'
    version = (0, 1, 0)

    def run(self) -> List[Tuple]:
        params = self.parameters
        rng = self.rng()
        self.failures = []
        for instance in range(params['instances']):
            width, height, channels = rng.integers(2, 10), rng.integers(2, 10), rng.integers(1, 5)
            geometry = BEVGeometry((int(width), int(height)), (1.0, 1.0), (0.0, 0.0))
            cells = rng.permutation(width * height)[:rng.integers(1, width * height + 1)]
            coords = np.stack([cells % width, cells // width, np.zeros_like(cells)], axis=1)
            features = rng.normal(size=(cells.size, channels))
            voxels = SparseVoxelSet(features, coords, (int(width), int(height), 1))
            dense = scatter_to_bev(voxels, int(channels), geometry)
            if not np.array_equal(gather_from_bev(dense, coords).data, features):
                self.failures.append(('instance {} gather'.format(instance), 'scattered rows', 'differs'))
            empty = np.ones(width * height, dtype=bool)
            empty[cells] = False
            if np.any(dense.features.data.reshape(channels, -1)[:, empty]):
                self.failures.append(('instance {} empty cells'.format(instance), 0.0, 'non-zero'))
        return self.failures


@CheckRunner.register
class CheckBoxMask(Check):

    key = 'boxMask'
    version = (0, 1, 0)

    def run(self) -> List[Tuple]:
        params = self.parameters
        rng = self.rng()
        self.failures = []
        grid = BEVGeometry((16, 16), (0.5, 0.5), (-4.0, -4.0))
        xs, ys = grid.cell_centers()
        for instance in range(params['instances']):
            count = int(rng.integers(1, 5))
            boxes = np.column_stack([
                rng.uniform(-4.0, 4.0, size=(count, 2)),
                rng.uniform(0.5, 4.0, size=(count, 2)),
                rng.uniform(-np.pi, np.pi, size=count),
            ])
            mask = mask_ground_truth(boxes, grid)
            expected = np.array([[any(oracles.point_in_box(x, y, box) for box in boxes) for x, y in zip(row_x, row_y)]
                                 for row_x, row_y in zip(xs, ys)], dtype=np.float64)
            wrong = int((mask != expected).sum())
            if wrong:
                self.failures.append(('instance {}'.format(instance), '0 mismatched cells', wrong))
        return self.failures
