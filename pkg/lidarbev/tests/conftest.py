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
Common fixtures for pipeline tests
"""
import numpy as np
import pytest

from bevgrad.tensor import checked_mode
from lidarbev.config import build_config
from lidarbev.harness.scenes import generate_scene


TINY_OVERRIDES = {
    'pipeline': {
        'grid_size': [16, 16],
        'cell_size_m': 1.0,
        'range_m': [[-8.0, 8.0], [-8.0, 8.0], [-0.5, 2.5]],
        'voxel_height_m': 1.0,
        'point_hidden': 8,
        'lidar_channels': 8,
        'image_channels': 4,
        'depth_bins': 8,
        'depth_max_m': 16.0,
        'depth_hidden': 8,
        'groups': 2,
        'stages': 2,
        'blocks_per_stage': 1,
        'scan_state_dim': 4,
        'head_hidden': 4,
    },
    'generator': {
        'azimuth_rays': 180,
        'beams': 8,
        'image_size': [8, 16],
        'focal_px': 8.0,
    },
    'training': {'steps': 3, 'num_scenes': 2, 'batch_size': 1, 'log_every': 0},
    'evaluation': {'num_scenes': 2},
    'robustness': {'replicates': 1},
    'ablation': {'variants': ['baseline_lc', 'full'], 'replicates': 1},
}


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture(autouse=True)
def checked():
    with checked_mode(True):
        yield


@pytest.fixture
def tiny_config(tmp_path):
    """
    A 16x16 grid at 1 m with narrow channels, small enough to train in seconds.
    """
    return build_config(dict(TINY_OVERRIDES, output_dir=str(tmp_path)))


@pytest.fixture
def scene(tiny_config):
    return generate_scene(3, tiny_config.generator)
