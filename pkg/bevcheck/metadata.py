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
Contains descriptions of currently known checks
and their default parameters
"""

from copy import deepcopy
from typing import Dict, Optional


class CheckDescription(object):

    params = {
        'enabled': False,
        'type': 'warning',
        'parameters': {},
    }

    def __init__(
        self,
        msg: str = '',
        item_msg: str = '{item}',
        params: Optional[Dict] = None,
        check_description: str = '',
        check_title: str = '',
    ):
        self.msg = msg  # user-facing failure message
        self.item_msg = item_msg
        if params is not None:
            self.params = deepcopy(self.params)
            self.params.update(params)
        self.check_description = check_description
        self.check_title = check_title


checks = {
    'primitiveGradients': CheckDescription(
        msg='Primitives whose analytic gradient disagrees with finite differences',
        item_msg='Primitive "{item}" gradient check failed',
        params={
            'enabled': True,
            'type': 'error',
            'parameters': {'instances': 5, 'step': 1e-5, 'tolerance': 1e-4},
        },
        check_title='Check primitive gradients',
        check_description='Central finite differences against every registered primitive',
    ),
    'blockGradients': CheckDescription(
        msg='Composite blocks whose analytic gradient disagrees with finite differences',
        item_msg='Block "{item}" gradient check failed',
        params={
            'enabled': True,
            'type': 'error',
            'parameters': {'instances': 5, 'step': 1e-5, 'tolerance': 1e-4, 'max_elements': 24},
        },
        check_title='Check block gradients',
        check_description='Finite differences through the mask head, MM-DCN, dilation block, '
                          'scan layer and lift-splat',
    ),
    'convOracle': CheckDescription(
        msg='Convolution differs from the loop oracle',
        item_msg='{item}',
        params={
            'enabled': True,
            'type': 'error',
            'parameters': {'instances': 5, 'tolerance': 1e-10},
        },
        check_title='Check conv2d',
        check_description='Vectorized conv2d against nested loops',
    ),
    'deformConvOracle': CheckDescription(
        msg='Deformable convolution differs from the bilinear loop oracle',
        item_msg='{item}',
        params={
            'enabled': True,
            'type': 'error',
            'parameters': {'instances': 3, 'tolerance': 1e-10},
        },
        check_title='Check deformable conv sampling',
        check_description='Modulated deformable conv with random offsets against per-point bilinear loops',
    ),
    'dcnDegeneracy': CheckDescription(
        msg='Deformable convolution does not reduce to a regular convolution',
        item_msg='{item}',
        params={
            'enabled': True,
            'type': 'error',
            'parameters': {'instances': 20, 'tolerance': 1e-10},
        },
        check_title='Check DCN degeneracy',
        check_description='Zero offsets and unit modulation must reproduce conv2d',
    ),
    'lidarCentricInvariance': CheckDescription(
        msg='Image features leak into MM-DCN output through sampling',
        item_msg='{item}',
        params={
            'enabled': True,
            'type': 'error',
            'parameters': {'instances': 5},
        },
        check_title='Check LiDAR-centric sampling',
        check_description='With a frozen deformation field, changing image BEV features changes nothing',
    ),
    'scanOracle': CheckDescription(
        msg='Selective scan differs from the unrolled recurrence',
        item_msg='{item}',
        params={
            'enabled': True,
            'type': 'error',
            'parameters': {'lengths': [1, 7, 64, 1024], 'tolerance': 1e-10},
        },
        check_title='Check selective scan',
        check_description='Vectorized scan against a scalar recurrence',
    ),
    'scanCausality': CheckDescription(
        msg='Selective scan output depends on future inputs',
        item_msg='{item}',
        params={
            'enabled': True,
            'type': 'error',
            'parameters': {'length': 64},
        },
        check_title='Check scan causality',
        check_description='Perturbing position t leaves outputs before t bit-identical',
    ),
    'liftSplatConservation': CheckDescription(
        msg='Lift-splat does not conserve feature mass',
        item_msg='{item}',
        params={
            'enabled': True,
            'type': 'error',
            'parameters': {'instances': 5, 'mass_tolerance': 1e-9, 'softmax_tolerance': 1e-12},
        },
        check_title='Check lift-splat conservation',
        check_description='Splatted mass equals lifted mass for an in-grid frustum',
    ),
    'hilbertCurve': CheckDescription(
        msg='Hilbert curve is not a bijective unit-step walk',
        item_msg='{item}',
        params={
            'enabled': True,
            'type': 'error',
            'parameters': {'max_order_2d': 6, 'max_order_3d': 4},
        },
        check_title='Check Hilbert curve',
        check_description='Exhaustive bijectivity and adjacency of consecutive curve cells',
    ),
    'dilationSetAlgebra': CheckDescription(
        msg='Sparse voxel dilation does not produce input union mask',
        item_msg='{item}',
        params={
            'enabled': True,
            'type': 'error',
            'parameters': {'instances': 100, 'tau': 0.4},
        },
        check_title='Check dilation occupancy',
        check_description='Occupancy after dilation, preserved original features and the strict tau threshold',
    ),
    'voxelizationOracle': CheckDescription(
        msg='Voxelization differs from the hash-map oracle',
        item_msg='{item}',
        params={
            'enabled': True,
            'type': 'error',
            'parameters': {'instances': 5, 'points': 300, 'tolerance': 1e-12},
        },
        check_title='Check voxelization',
        check_description='Voxel coordinates and mean features against a dictionary accumulation',
    ),
    'scatterRoundTrip': CheckDescription(
        msg='Gathering scattered voxel features does not return them',
        item_msg='{item}',
        params={
            'enabled': True,
            'type': 'error',
            'parameters': {'instances': 5},
        },
        check_title='Check BEV scatter',
        check_description='gather(scatter(features)) equals the features of unique cells',
    ),
    'boxMask': CheckDescription(
        msg='Foreground mask differs from the brute-force point-in-box test',
        item_msg='{item}',
        params={
            'enabled': True,
            'type': 'error',
            'parameters': {'instances': 5},
        },
        check_title='Check box mask',
        check_description='Mask ground truth against per-cell point-in-quad tests',
    ),
    'trainingGate': CheckDescription(
        msg='Desk-scale training did not reach its gates',
        item_msg='{item}',
        params={
            'enabled': False,
            'type': 'error',
            'parameters': {'max_loss_ratio': 0.5, 'min_mask_iou': 0.5},
        },
        check_title='Check training',
        check_description='Mask focal loss halves and held-out mask IoU reaches the gate',
    ),
    'trainingDeterminism': CheckDescription(
        msg='Two identical training runs differ',
        item_msg='{item}',
        params={
            'enabled': False,
            'type': 'error',
            'parameters': {'steps': 3, 'num_scenes': 2},
        },
        check_title='Check reproducibility',
        check_description='Loss curves and weights of two single-threaded runs are bit-identical',
    ),
    'ablationDirection': CheckDescription(
        msg='Full pipeline does not beat the LiDAR-centric baseline',
        item_msg='{item}',
        params={
            'enabled': False,
            'type': 'warning',
            'parameters': {'variants': ['baseline_lc', 'full']},
        },
        check_title='Check ablation direction',
        check_description='Mean mask IoU of the full pipeline is at least the baseline\'s',
    ),
    'robustnessDirection': CheckDescription(
        msg='LiDAR-centric pipeline is not more robust than naive concatenation',
        item_msg='{item}',
        params={
            'enabled': False,
            'type': 'warning',
            'parameters': {},
        },
        check_title='Check robustness direction',
        check_description='Relative drop of the LiDAR-centric pipeline is below the naive one for every '
                          'degradation; naive drops grow with misalignment',
    ),
}

EXPERIMENT_CHECKS = ('trainingGate', 'trainingDeterminism', 'ablationDirection', 'robustnessDirection')
