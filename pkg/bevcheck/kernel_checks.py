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
Vectorized kernels against their loop oracles, plus the structural properties of the
deformable convolution, the selective scan and lift-splat.
"""

import logging
from typing import List, Tuple

import numpy as np

from bevgrad import basic_ops, nn_ops
from bevgrad.tensor import Tape, Tensor, backward, parameter
from lidarbev.geometry import BEVGeometry, DenseBEVGrid
from lidarbev.sbdb import (DeformableConvParams, DeformationField, ModulatedDeformConv, deform_conv, mm_dcn,
                              predict_deformation, regular_grid)
from lidarbev.scan import ScanParams, mamba_layer, scan
from lidarbev.view_transform import CameraModel, DepthBins, depth_distribution, frustum_cells, lift_splat

from bevcheck import oracles
from bevcheck.common import Check
from bevcheck.runners import CheckRunner


logger = logging.getLogger(__name__)


def _max_diff(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.abs(np.asarray(a) - np.asarray(b)).max()) if np.size(a) else 0.0


@CheckRunner.register
class CheckConvOracle(Check):

    key = 'convOracle'
    version = (0, 1, 0)

    def run(self) -> List[Tuple]:
        params = self.parameters
        rng = self.rng()
        self.failures = []
        for instance in range(params['instances']):
            channels, out_channels = rng.integers(1, 4, size=2)
            kernel = int(rng.choice([1, 3]))
            stride = int(rng.choice([1, 2]))
            padding = int(rng.integers(0, kernel // 2 + 1))
            x = rng.normal(size=(channels, rng.integers(4, 8), rng.integers(4, 8)))
            w = rng.normal(size=(out_channels, channels, kernel, kernel))
            b = rng.normal(size=out_channels)
            fast = nn_ops.conv2d(x, w, b, stride=stride, padding=padding).data
            slow = oracles.conv2d(x, w, b, stride=stride, padding=padding)
            if fast.shape != slow.shape:
                self.failures.append(('instance {} shape'.format(instance), list(slow.shape), list(fast.shape)))
                continue
            diff = _max_diff(fast, slow)
            if diff > params['tolerance']:
                self.failures.append(('instance {} (k={}, stride={}, padding={})'.format(
                    instance, kernel, stride, padding), '<= {:g}'.format(params['tolerance']), diff))
        return self.failures


@CheckRunner.register
class CheckDeformConvOracle(Check):

    key = 'deformConvOracle'
    version = (0, 1, 0)

    def run(self) -> List[Tuple]:
        params = self.parameters
        rng = self.rng()
        self.failures = []
        for instance in range(params['instances']):
            groups, in_per_group, out_per_group, height, width = 2, 2, 2, 4, 5
            base = regular_grid(3)
            points = base.shape[0]
            x = rng.normal(size=(groups * in_per_group, height, width))
            # large enough to push some corners off the map
            offsets = rng.uniform(-2.5, 2.5, size=(groups, points, 2, height, width))
            modulation = rng.uniform(size=(groups, points, height, width))
            weight = rng.normal(size=(groups, out_per_group, in_per_group, points))
            bias = rng.normal(size=groups * out_per_group)
            fast = ModulatedDeformConv.apply(x, offsets, modulation, weight, bias, base_offsets=base).data
            slow = oracles.deform_conv(x, offsets, modulation, weight, bias, base)
            diff = _max_diff(fast, slow)
            if diff > params['tolerance']:
                self.failures.append(('instance {}'.format(instance), '<= {:g}'.format(params['tolerance']), diff))
        return self.failures


@CheckRunner.register
class CheckDcnDegeneracy(Check):
    """
    Zero offsets with unit modulation sample the regular kernel grid, so the deformable
    convolution must equal a grouped regular convolution.
    """

    key = 'dcnDegeneracy'
    version = (0, 1, 0)

    def run(self) -> List[Tuple]:
        params = self.parameters
        rng = self.rng()
        self.failures = []
        for instance in range(params['instances']):
            groups = int(rng.choice([1, 2, 4]))
            kernel = int(rng.choice([1, 3, 5]))
            height, width = rng.integers(3, 7, size=2)
            dcn = DeformableConvParams(4, 4, 4, rng, groups=groups, kernel_size=kernel)
            dcn.bias.data[:] = rng.normal(size=4)
            points = dcn.num_points
            field = DeformationField(Tensor(np.zeros((groups, points, 2, height, width))),
                                     Tensor(np.ones((groups, points, height, width))))
            x = rng.normal(size=(4, height, width))
            deformed = deform_conv(x, field, dcn).data
            regular = nn_ops.conv2d(x, dcn.as_dense_kernel(), dcn.bias.data, padding=kernel // 2).data
            diff = _max_diff(deformed, regular)
            if diff > params['tolerance']:
                self.failures.append(('instance {} (groups={}, k={})'.format(instance, groups, kernel),
                                      '<= {:g}'.format(params['tolerance']), diff))
        return self.failures


@CheckRunner.register
class CheckLidarCentricInvariance(Check):
    """
    The deformable convolution samples the LiDAR map only: with the field frozen, the image
    BEV features receive no gradient and the output equals the live-field output.
    """

    key = 'lidarCentricInvariance'
    version = (0, 1, 0)

    def run(self) -> List[Tuple]:
        params = self.parameters
        rng = self.rng()
        self.failures = []
        geometry = BEVGeometry((6, 5), (1.0, 1.0), (0.0, 0.0))
        for instance in range(params['instances']):
            lidar = DenseBEVGrid(parameter(rng.normal(size=(4, 5, 6)), name='lidar'), geometry)
            image = DenseBEVGrid(parameter(rng.normal(size=(3, 5, 6)), name='image'), geometry)
            dcn = DeformableConvParams(4, 4, 7, rng, groups=2)
            dcn.predictor.weight.data[:] = rng.normal(scale=0.3, size=dcn.predictor.weight.shape)

            with Tape():
                field = predict_deformation(lidar, image, dcn)
                frozen = DeformationField(Tensor(field.offsets.data), Tensor(field.modulation.data))
                out = mm_dcn(lidar, frozen, dcn)
                loss = basic_ops.sum(out.features)
            backward(loss)
            live = mm_dcn(lidar, field, dcn).features.data
            grad = image.features.grad
            leaked = 0.0 if grad is None else float(np.abs(grad).max())
            if leaked != 0.0:
                self.failures.append(('instance {} image gradient'.format(instance), 0.0, leaked))
            if not np.array_equal(live, out.features.data):
                self.failures.append(('instance {} frozen-field output'.format(instance), 'bit-identical',
                                      _max_diff(live, out.features.data)))

            other = DenseBEVGrid(Tensor(rng.normal(size=(3, 5, 6))), geometry)
            guided = mm_dcn(lidar, predict_deformation(lidar, other, dcn), dcn).features.data
            if np.array_equal(guided, live):
                self.failures.append(('instance {} image guidance'.format(instance), 'output changes', 'unchanged'))
        return self.failures


def _scan_inputs(rng: np.random.Generator, length: int, inner: int = 3, states: int = 4):
    return (
        rng.normal(size=(length, inner)),
        rng.uniform(0.01, 0.5, size=(length, inner)),
        -rng.uniform(0.1, 2.0, size=(inner, states)),
        rng.normal(size=(length, states)),
        rng.normal(size=(length, states)),
        rng.normal(size=inner),
    )


@CheckRunner.register
class CheckScanOracle(Check):

    key = 'scanOracle'
    version = (0, 1, 0)

    def run(self) -> List[Tuple]:
        params = self.parameters
        rng = self.rng()
        self.failures = []
        for length in params['lengths']:
            inputs = _scan_inputs(rng, int(length))
            diff = _max_diff(scan(*inputs).data, oracles.scan_recurrence(*inputs))
            if diff > params['tolerance']:
                self.failures.append(('length {}'.format(length), '<= {:g}'.format(params['tolerance']), diff))
        return self.failures


@CheckRunner.register
class CheckScanCausality(Check):
    """
    Perturbing sequence position t must leave every earlier output bit-identical, both for
    the bare scan and for the gated layer with its causal convolution.
    """

    key = 'scanCausality'
    version = (0, 1, 0)

    def run(self) -> List[Tuple]:
        length = int(self.parameters['length'])
        rng = self.rng()
        self.failures = []
        u, delta, a, b, c, d = _scan_inputs(rng, length)
        layer = ScanParams(3, rng, state_dim=4)
        seq = rng.normal(size=(length, 3))
        reference = scan(u, delta, a, b, c, d).data
        layer_reference = mamba_layer(seq, layer).data

        for t in range(length):
            bumped_u = u.copy()
            bumped_u[t] += 1.0
            bumped_seq = seq.copy()
            bumped_seq[t] += 1.0
            for name, before, after in (
                ('scan', reference, scan(bumped_u, delta, a, b, c, d).data),
                ('layer', layer_reference, mamba_layer(bumped_seq, layer).data),
            ):
                if not np.array_equal(before[:t], after[:t]):
                    self.failures.append(('{} outputs before {}'.format(name, t), 'bit-identical',
                                          _max_diff(before[:t], after[:t])))
                if np.array_equal(before[t], after[t]):
                    self.failures.append(('{} output at {}'.format(name, t), 'changed', 'unchanged'))
        return self.failures


@CheckRunner.register
class CheckLiftSplatConservation(Check):
    """
    With every frustum point inside the grid, splatting loses no feature mass: per channel,
    the BEV sum equals the image sum because each depth distribution sums to one.
    """

    key = 'liftSplatConservation'
    version = (0, 1, 0)

    def run(self) -> List[Tuple]:
        params = self.parameters
        rng = self.rng()
        self.failures = []
        grid = BEVGeometry((64, 64), (0.5, 0.5), (-16.0, -16.0))
        bins = DepthBins(1.0, 8.0, 6)
        for instance in range(params['instances']):
            cam = CameraModel.looking(rng.uniform(-np.pi, np.pi), 1.5, 4.0, (4, 6),
                                      position_m=tuple(rng.uniform(-2.0, 2.0, size=2)))
            dropped = int((frustum_cells(cam, bins, grid) < 0).sum())
            if dropped:
                self.failures.append(('instance {} frustum'.format(instance), 'inside grid',
                                      '{} points outside'.format(dropped)))
                continue
            feat = rng.normal(size=(3, 4, 6))
            dist = depth_distribution(rng.normal(scale=2.0, size=(6, 4, 6))).data
            softmax_error = float(np.abs(dist.sum(axis=0) - 1.0).max())
            if softmax_error > params['softmax_tolerance']:
                self.failures.append(('instance {} depth distribution sum'.format(instance),
                                      '<= {:g}'.format(params['softmax_tolerance']), softmax_error))
            splat = lift_splat(feat, dist, cam, bins, grid).features.data
            lifted = feat.sum(axis=(1, 2))
            error = float((np.abs(splat.sum(axis=(1, 2)) - lifted) / np.maximum(1.0, np.abs(lifted))).max())
            if error > params['mass_tolerance']:
                self.failures.append(('instance {} mass'.format(instance), '<= {:g}'.format(params['mass_tolerance']),
                                      error))
        return self.failures
