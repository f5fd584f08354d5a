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
Assembles the end-to-end detector: LiDAR voxel encoder, camera lift-splat branch,
optional sparse voxel dilation, a multi-stage BEV backbone of semantic-guided dilation
blocks (or plain conv blocks), a neck and two dense heads.

`naive_concat` mode is the fusion baseline: image BEV features are concatenated into the
LiDAR BEV map once, before plain conv stages.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from bevgrad import basic_ops, nn_ops
from bevgrad.tensor import Tensor

from .. import geometry
from ..config import PipelineConfig
from ..errors import GridError
from ..geometry import BEVGeometry, DenseBEVGrid, SparseVoxelSet, VoxelizationConfig
from ..modules import ChannelNorm, Conv2d, ConvHead, Linear, Module, Pointwise
from ..sbdb import ImageBEVEncoder, SBDBBlock
from ..svdb import DilationResult, ForegroundField, SVDBlock
from ..view_transform import DepthBins, DepthNet, depth_distribution, predict_depth_distribution, splat_views
from .degradation import Degradation
from .scenes import Scene


logger = logging.getLogger(__name__)

MASK_HEAD_PRIOR = -2.0
CENTER_HEAD_PRIOR = -2.2


class PointEncoder(Module):
    """
    Two row-wise layers over voxel features, then max over occupied z per BEV cell.
    """

    def __init__(self, in_features: int, hidden: int, out_features: int, rng: np.random.Generator):
        self.fc1 = Linear(in_features, hidden, rng)
        self.fc2 = Linear(hidden, out_features, rng)

    def __call__(self, voxels: SparseVoxelSet) -> SparseVoxelSet:
        features = basic_ops.relu(self.fc2(basic_ops.relu(self.fc1(voxels.features))))
        return geometry.collapse_z(SparseVoxelSet(features, voxels.coords, voxels.grid_extent))


class ConvBlock(Module):
    """
    The semantic-guided block with its deformable conv replaced by a regular conv.
    """

    def __init__(self, channels: int, rng: np.random.Generator, kernel_size: int = 3, ffn_ratio: int = 2):
        self.conv = Conv2d(channels, channels, kernel_size, rng)
        self.norm1 = ChannelNorm(channels)
        self.fc1 = Pointwise(channels, channels * ffn_ratio, rng)
        self.fc2 = Pointwise(channels * ffn_ratio, channels, rng, gain=0.5)
        self.norm2 = ChannelNorm(channels)

    def __call__(self, lidar_bev: DenseBEVGrid, image_bev: Optional[DenseBEVGrid] = None) -> DenseBEVGrid:
        mid = basic_ops.add(self.norm1(self.conv(lidar_bev.features)), lidar_bev.features)
        hidden = self.fc2(basic_ops.silu(self.fc1(mid)))
        return DenseBEVGrid(basic_ops.add(self.norm2(hidden), mid), lidar_bev.geometry)


class Stage(Module):
    """
    Blocks at one resolution; a stage after the first halves the grid first.
    """

    def __init__(self, blocks: List[Module], down: Optional[Conv2d] = None):
        self.down = down
        self.blocks = blocks

    def __call__(self, features: DenseBEVGrid, guidance: Optional[DenseBEVGrid] = None) -> DenseBEVGrid:
        if self.down is not None:
            pooled = nn_ops.avg_pool2d(basic_ops.relu(self.down(features.features)), 2)
            features = DenseBEVGrid(pooled, features.geometry.downsampled(2))
        for block in self.blocks:
            features = block(features, guidance)
        return features


class CameraBranch(Module):
    """
    Per-view feature and depth networks followed by lift-splat; views are summed.
    """

    def __init__(self, in_channels: int, out_channels: int, depth_hidden: int, bins: DepthBins,
                 rng: np.random.Generator):
        self.features = Pointwise(in_channels, out_channels, rng)
        self.depth_net = DepthNet(in_channels, depth_hidden, bins.num_bins, rng)
        self.bins = bins

    def depth(self, image_feat, degradation: Optional[Degradation], view: int) -> Tensor:
        if degradation is None:
            return predict_depth_distribution(image_feat, self.depth_net)
        if degradation.target == 'depth_logits':
            logits = _degraded(degradation, 'depth_logits', self.depth_net.logits(image_feat), view)
            return depth_distribution(logits)
        dist = predict_depth_distribution(image_feat, self.depth_net)
        return _degraded(degradation, 'depth_distribution', dist, view)

    def __call__(self, scene: Scene, grid: BEVGeometry, z_range_m, degradation: Optional[Degradation] = None):
        views = [(basic_ops.relu(self.features(view.image_feat)), self.depth(view.image_feat, degradation, index),
                  view.camera) for index, view in enumerate(scene.views)]
        bev = splat_views(views, self.bins, grid, z_range_m)
        if degradation is not None:
            bev = DenseBEVGrid(_degraded(degradation, 'image_bev', bev.features), grid)
        return bev


def _degraded(degradation: Degradation, stage: str, value: Tensor, view: int = 0) -> Tensor:
    corrupted = degradation.apply(stage, value.data, view)
    return value if corrupted is value.data else Tensor(corrupted)


@dataclass
class PipelineOutput:
    mask_logits: Tensor
    center_logits: Tensor
    lidar_voxels: SparseVoxelSet
    image_bev: Optional[DenseBEVGrid] = None
    svdb_field: Optional[ForegroundField] = None
    dilation: Optional[DilationResult] = None
    stage_outputs: List[DenseBEVGrid] = field(default_factory=list)

    @property
    def mask_prob(self) -> Tensor:
        return basic_ops.sigmoid(self.mask_logits)

    @property
    def center_prob(self) -> Tensor:
        return basic_ops.sigmoid(self.center_logits)


class Pipeline(Module):

    def __init__(self, cfg: PipelineConfig, image_in_channels: int, rng: np.random.Generator):
        self.cfg = cfg
        (xmin, _), (ymin, _), z_range = cfg.range_m
        self.voxel_config = VoxelizationConfig((cfg.cell_size_m, cfg.cell_size_m, cfg.voxel_height_m),
                                               tuple(tuple(r) for r in cfg.range_m))
        self.grid = BEVGeometry(tuple(cfg.grid_size), (cfg.cell_size_m, cfg.cell_size_m), (xmin, ymin))
        if self.grid.grid_size != self.voxel_config.grid_extent[:2]:
            raise GridError('Voxel range gives {} cells, grid_size is {}'
                            .format(self.voxel_config.grid_extent[:2], self.grid.grid_size))
        self.z_range_m = tuple(z_range)
        channels, image_channels = cfg.lidar_channels, cfg.image_channels

        self.point_encoder = PointEncoder(4, cfg.point_hidden, channels, rng)
        self.camera = None
        if self.uses_image:
            bins = DepthBins(cfg.depth_min_m, cfg.depth_max_m, cfg.depth_bins)
            self.camera = CameraBranch(image_in_channels, image_channels, cfg.depth_hidden, bins, rng)

        self.svdb = None
        if cfg.use_svdb:
            self.svdb = SVDBlock(channels, image_channels, rng, tau=cfg.tau, mask_source=cfg.svdb_mask_source,
                                 fill=cfg.svdb_fill, hidden=cfg.head_hidden, state_dim=cfg.scan_state_dim,
                                 expand=cfg.scan_expand, use_conv=cfg.scan_conv, conv_width=cfg.scan_conv_width)

        self.fuse = Pointwise(channels + image_channels, channels, rng) if cfg.mode == 'naive_concat' else None
        self.image_encoder = None
        if cfg.use_sbdb and cfg.sbdb_guidance != 'lidar':
            self.image_encoder = ImageBEVEncoder(image_channels, cfg.stages - 1, rng)

        self.stages = []
        for index in range(cfg.stages):
            down = Conv2d(channels, channels, 3, rng) if index > 0 else None
            if cfg.use_sbdb:
                blocks = [SBDBBlock(channels, image_channels, rng, groups=cfg.groups, kernel_size=cfg.kernel_size,
                                    ffn_ratio=cfg.ffn_ratio, guidance=cfg.sbdb_guidance)
                          for _ in range(cfg.blocks_per_stage)]
            else:
                blocks = [ConvBlock(channels, rng, cfg.kernel_size, cfg.ffn_ratio) for _ in range(cfg.blocks_per_stage)]
            self.stages.append(Stage(blocks, down))

        self.mask_head = ConvHead(channels, cfg.head_hidden, rng, prior=MASK_HEAD_PRIOR)
        self.center_head = ConvHead(channels, cfg.head_hidden, rng, prior=CENTER_HEAD_PRIOR)
        logger.debug('Built %s pipeline (svdb=%s, sbdb=%s) with %d parameters',
                     cfg.mode, cfg.use_svdb, cfg.use_sbdb, self.num_parameters())

    @property
    def uses_image(self) -> bool:
        cfg = self.cfg
        return (cfg.mode == 'naive_concat'
                or (cfg.use_svdb and cfg.svdb_mask_source == 'multimodal')
                or (cfg.use_sbdb and cfg.sbdb_guidance != 'lidar'))

    def encode_lidar(self, points: np.ndarray):
        voxels = geometry.voxelize(points, self.voxel_config)
        collapsed = self.point_encoder(voxels)
        return collapsed, geometry.scatter_to_bev(collapsed, self.cfg.lidar_channels, self.grid)

    def __call__(self, scene: Scene, degradation: Optional[Degradation] = None) -> PipelineOutput:
        collapsed, lidar_bev = self.encode_lidar(scene.points)
        output = PipelineOutput(None, None, collapsed)
        image_bev = None
        if self.camera is not None:
            image_bev = self.camera(scene, self.grid, self.z_range_m, degradation)
            output.image_bev = image_bev

        if self.svdb is not None:
            lidar_bev, output.svdb_field, output.dilation = self.svdb(collapsed, lidar_bev, image_bev)

        if self.fuse is not None:
            fused = basic_ops.relu(self.fuse(basic_ops.concat([lidar_bev.features, image_bev.features], axis=0)))
            lidar_bev = DenseBEVGrid(fused, self.grid)

        pyramid = None
        if self.image_encoder is not None:
            pyramid = self.image_encoder.pyramid(image_bev, self.cfg.stages)

        features = lidar_bev
        for index, stage in enumerate(self.stages):
            features = stage(features, pyramid[index] if pyramid is not None else None)
            output.stage_outputs.append(features)

        neck = None
        for index, stage_output in enumerate(output.stage_outputs):
            up = nn_ops.upsample_nearest(stage_output.features, 2 ** index)
            neck = up if neck is None else basic_ops.add(neck, up)

        output.mask_logits = _squeeze(self.mask_head(neck))
        output.center_logits = _squeeze(self.center_head(neck))
        return output

    def blocks(self) -> List[Module]:
        return [block for stage in self.stages for block in stage.blocks]


def _squeeze(logits: Tensor) -> Tensor:
    return basic_ops.reshape(logits, logits.shape[1:])


def build_pipeline(cfg: PipelineConfig, image_in_channels: int, seed: int = 0) -> Pipeline:
    """
    Validates `cfg` and initializes a pipeline from `seed`.
    """
    cfg = cfg.validate()
    return Pipeline(cfg, image_in_channels, np.random.default_rng(seed))
