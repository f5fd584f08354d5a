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
Finite-difference checks of analytic gradients, per primitive and through composite blocks.
"""

import logging
from typing import Callable, Dict, List, Tuple

import numpy as np

import lidarbev  # noqa F401 registers the pipeline primitives
from bevgrad.gradcheck import GradCheckResult, check_all_primitives, check_function
from bevgrad.tensor import Tensor, parameter
from lidarbev.geometry import BEVGeometry, DenseBEVGrid
from lidarbev.modules import ConvHead, Module
from lidarbev.sbdb import DeformableConvParams, SBDBBlock, mm_dcn, predict_deformation
from lidarbev.scan import ScanParams, mamba_layer
from lidarbev.svdb import predict_foreground
from lidarbev.view_transform import CameraModel, DepthBins, depth_distribution, lift_splat

from bevcheck.common import Check
from bevcheck.runners import CheckRunner


logger = logging.getLogger(__name__)

BlockCase = Tuple[Callable[[], Tensor], List[Tensor]]


def _worst_per_name(results: List[GradCheckResult]) -> Dict[str, GradCheckResult]:
    worst = {}
    for result in results:
        if not result.passed and (result.name not in worst or result.max_error > worst[result.name].max_error):
            worst[result.name] = result
    return worst


@CheckRunner.register
class CheckPrimitiveGradients(Check):
    """
    Every registered primitive against central finite differences.
    """

    key = 'primitiveGradients'
    version = (0, 1, 0)

    def run(self) -> List[Tuple]:
        params = self.parameters
        self.failures = []
        results = check_all_primitives(self.rng(), instances=params['instances'], h=params['step'],
                                       tolerance=params['tolerance'])
        logger.info('Checked %d primitive instances', len(results))
        for name, result in sorted(_worst_per_name(results).items()):
            self.failures.append((name, '< {:g}'.format(result.tolerance), '{:.3e} at {}'.format(
                result.max_error, result.worst)))
        return self.failures


def _random_deformation(dcn: DeformableConvParams, rng: np.random.Generator) -> None:
    # zero-initialized predictors sample on integer positions, where bilinear weights kink
    dcn.predictor.weight.data[:] = rng.normal(scale=0.2, size=dcn.predictor.weight.shape)
    dcn.predictor.bias.data[:] = rng.uniform(-0.4, 0.4, size=dcn.predictor.bias.shape)


def _leaves(*modules: Module) -> List[Tensor]:
    return [param for module in modules for _, param in module.named_parameters()]


def mask_head_case(rng: np.random.Generator) -> BlockCase:
    geometry = BEVGeometry((5, 4), (1.0, 1.0), (0.0, 0.0))
    lidar = DenseBEVGrid(parameter(rng.normal(size=(3, 4, 5)), name='lidar'), geometry)
    image = DenseBEVGrid(parameter(rng.normal(size=(2, 4, 5)), name='image'), geometry)
    head = ConvHead(5, 4, rng)
    return (lambda: predict_foreground(image, lidar, head, 0.4).prob), \
        [lidar.features, image.features] + _leaves(head)


def mm_dcn_case(rng: np.random.Generator) -> BlockCase:
    geometry = BEVGeometry((5, 4), (1.0, 1.0), (0.0, 0.0))
    lidar = DenseBEVGrid(parameter(rng.normal(size=(4, 4, 5)), name='lidar'), geometry)
    image = DenseBEVGrid(parameter(rng.normal(size=(2, 4, 5)), name='image'), geometry)
    dcn = DeformableConvParams(4, 4, 6, rng, groups=2)
    _random_deformation(dcn, rng)

    def forward():
        return mm_dcn(lidar, predict_deformation(lidar, image, dcn), dcn).features

    return forward, [lidar.features, image.features] + _leaves(dcn)


def sbdb_case(rng: np.random.Generator) -> BlockCase:
    geometry = BEVGeometry((4, 4), (1.0, 1.0), (0.0, 0.0))
    lidar = DenseBEVGrid(parameter(rng.normal(size=(4, 4, 4)), name='lidar'), geometry)
    image = DenseBEVGrid(parameter(rng.normal(size=(2, 4, 4)), name='image'), geometry)
    block = SBDBBlock(4, 2, rng, groups=2)
    _random_deformation(block.dcn, rng)
    return (lambda: block(lidar, image).features), [lidar.features, image.features] + _leaves(block)


def scan_layer_case(rng: np.random.Generator) -> BlockCase:
    seq = parameter(rng.normal(size=(6, 3)), name='seq')
    params = ScanParams(3, rng, state_dim=2, expand=2, conv_width=2)
    return (lambda: mamba_layer(seq, params)), [seq] + _leaves(params)


def lift_splat_case(rng: np.random.Generator) -> BlockCase:
    cam = CameraModel.looking(rng.uniform(-np.pi, np.pi), 1.0, 2.0, (3, 4))
    bins = DepthBins(1.0, 6.0, 4)
    grid = BEVGeometry((8, 8), (1.5, 1.5), (-6.0, -6.0))
    feat = parameter(rng.normal(size=(2, 3, 4)), name='feat')
    logits = parameter(rng.normal(size=(4, 3, 4)), name='depth_logits')
    return (lambda: lift_splat(feat, depth_distribution(logits), cam, bins, grid).features), [feat, logits]


BLOCK_CASES = {
    'mask_head': mask_head_case,
    'mm_dcn': mm_dcn_case,
    'sbdb_block': sbdb_case,
    'scan_layer': scan_layer_case,
    'lift_splat': lift_splat_case,
}


@CheckRunner.register
class CheckBlockGradients(Check):
    """
    Composite blocks on small random instances, against finite differences over a random
    subset of every leaf.
    """

    key = 'blockGradients'
    version = (0, 1, 0)

    def run(self) -> List[Tuple]:
        params = self.parameters
        rng = self.rng()
        self.failures = []
        results = []
        for name, build in BLOCK_CASES.items():
            for _ in range(params['instances']):
                fn, leaves = build(rng)
                results.append(check_function(fn, leaves, rng, name=name, h=params['step'],
                                              tolerance=params['tolerance'], max_elements=params['max_elements']))
        for name, result in sorted(_worst_per_name(results).items()):
            self.failures.append((name, '< {:g}'.format(result.tolerance), '{:.3e} at {}'.format(
                result.max_error, result.worst)))
        return self.failures
