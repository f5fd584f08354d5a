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
Contains descriptions of known configuration keys and their default values.

A run config file may only set keys present here; values are merged over a deep copy of
these defaults.
"""

DEGRADATION_KINDS = ('one_hot_noise', 'random_noise', 'spatial_misalignment')
PIPELINE_MODES = ('lidar_centric', 'naive_concat')

DEFAULTS = {
    'seed': 0,
    'threads': 1,
    'output_dir': 'runs',
    'checked': True,
    'pipeline': {
        'mode': 'lidar_centric',
        'use_svdb': True,
        'use_sbdb': True,
        'stages': 2,
        'blocks_per_stage': 2,
        'tau': 0.4,
        'groups': 4,
        'kernel_size': 3,
        'grid_size': [64, 64],  # X, Y cells
        'cell_size_m': 0.25,
        'range_m': [[-8.0, 8.0], [-8.0, 8.0], [-0.5, 2.5]],
        'voxel_height_m': 0.5,
        'point_hidden': 16,
        'lidar_channels': 16,
        'image_channels': 8,
        'depth_bins': 32,
        'depth_min_m': 1.0,
        'depth_max_m': 40.0,
        'depth_hidden': 16,
        'scan_state_dim': 8,
        'scan_expand': 2,
        'scan_conv': True,
        'scan_conv_width': 4,
        'ffn_ratio': 2,
        'head_hidden': 8,
        'svdb_mask_source': 'multimodal',
        'svdb_fill': 'learnable',
        'sbdb_guidance': 'multimodal',
    },
    'generator': {
        'min_boxes': 1,
        'max_boxes': 4,
        'placement_radius_m': [2.5, 6.5],
        'box_azimuth_deg': [-40.0, 40.0],
        'box_width_m': [1.4, 2.0],
        'box_length_m': [3.0, 4.5],
        'box_height_m': [1.3, 1.8],
        'num_classes': 3,
        'sensor_height_m': 1.8,
        'azimuth_rays': 720,
        'elevation_deg': [-28.0, 2.0],
        'beams': 16,
        'max_range_m': 14.0,
        'dropout_per_m': 0.04,
        'range_noise_m': 0.01,
        'num_cameras': 1,
        'camera_height_m': 1.5,
        'image_size': [24, 48],  # H, W pixels
        'focal_px': 24.0,
        'image_noise': 0.05,
    },
    'training': {
        'steps': 200,
        'num_scenes': 32,
        'batch_size': 4,  # scenes per step, taken in a fixed cyclic order
        'lr': 1e-2,
        'weight_decay': 1e-2,
        'betas': [0.9, 0.999],
        'focal_alpha': 0.25,
        'focal_gamma': 2.0,
        'center_loss_weight': 1.0,
        'svdb_loss_weight': 1.0,
        'center_radius_m': 0.5,
        'log_every': 20,
    },
    'evaluation': {
        'num_scenes': 16,
        'scene_seed_offset': 100000,
        'match_radius_m': 2.0,
        'peak_threshold': 0.3,
        'nms_radius_m': 1.0,
    },
    'robustness': {
        'degradations': list(DEGRADATION_KINDS),
        'magnitudes': {
            'one_hot_noise': [0.0, 0.5],
            'random_noise': [0.0, 1.0],
            'spatial_misalignment': [0, 1, 2, 4],
        },
        'default_magnitudes': {
            'one_hot_noise': 0.5,
            'random_noise': 1.0,
            'spatial_misalignment': 2,
        },
        'replicates': 3,
    },
    'ablation': {
        'variants': ['baseline_lc', 'svdb', 'sbdb', 'full'],
        'replicates': 3,
    },
    'export': {
        'modulation_threshold': 0.01,
        'query_cell': [],  # [x, y]; empty picks the cell nearest the first box center
        'png_scale': 4,
        'scene_seed': 7,
    },
}

# named pipeline overrides used by the ablation experiment
ABLATION_VARIANTS = {
    'baseline_lc': {'mode': 'lidar_centric', 'use_svdb': False, 'use_sbdb': False},
    'svdb': {'mode': 'lidar_centric', 'use_svdb': True, 'use_sbdb': False},
    'sbdb': {'mode': 'lidar_centric', 'use_svdb': False, 'use_sbdb': True},
    'full': {'mode': 'lidar_centric', 'use_svdb': True, 'use_sbdb': True},
    'naive_concat': {'mode': 'naive_concat', 'use_svdb': False, 'use_sbdb': False},
    'svdb_lidar_mask': {'use_svdb': True, 'svdb_mask_source': 'lidar'},
    'svdb_zero_fill': {'use_svdb': True, 'svdb_fill': 'zero'},
    'sbdb_lidar_guidance': {'use_sbdb': True, 'sbdb_guidance': 'lidar'},
    'sbdb_fusion': {'use_sbdb': True, 'sbdb_guidance': 'fusion'},
}
