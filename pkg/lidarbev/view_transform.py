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
Lift-splat view transform from camera feature maps to image BEV features.

Every pixel is lifted along its ray into D depth bins weighted by a predicted depth
distribution; each (pixel, bin) point is splatted into the BEV cell that contains it.

Camera frame: x right, y down, z forward; pixel (row i, column j) has its center at
(u, v) = (j + 0.5, i + 0.5) and bin depth d lifts it to d * K^-1 [u, v, 1].
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from bevgrad import basic_ops
from bevgrad.tensor import Primitive, Tensor, TensorLike, as_tensor, is_checked

from .errors import GridError, PipelineError
from .geometry import BEVGeometry, DenseBEVGrid
from .modules import Module, Pointwise


logger = logging.getLogger(__name__)

RIGID_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class CameraModel:
    """
    Pinhole camera: intrinsics K (3x3), camera-to-ego extrinsics (4x4), image size (H, W).
    """

    intrinsics: np.ndarray
    extrinsics: np.ndarray
    image_size: Tuple[int, int]

    def __post_init__(self):
        object.__setattr__(self, 'intrinsics', np.asarray(self.intrinsics, dtype=np.float64).reshape(3, 3))
        object.__setattr__(self, 'extrinsics', np.asarray(self.extrinsics, dtype=np.float64).reshape(4, 4))
        object.__setattr__(self, 'image_size', tuple(int(v) for v in self.image_size))
        self.validate()

    def validate(self) -> None:
        if abs(np.linalg.det(self.intrinsics)) < 1e-12:
            raise PipelineError('Camera intrinsics are singular')
        rotation = self.rotation
        if (np.abs(rotation.T @ rotation - np.eye(3)).max() > RIGID_TOLERANCE
                or abs(np.linalg.det(rotation) - 1.0) > RIGID_TOLERANCE
                or np.abs(self.extrinsics[3] - [0, 0, 0, 1]).max() > RIGID_TOLERANCE):
            raise PipelineError('Camera extrinsics are not a rigid transform')

    @property
    def rotation(self) -> np.ndarray:
        return self.extrinsics[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.extrinsics[:3, 3]

    @classmethod
    def looking(cls, yaw: float, height_m: float, focal_px: float, image_size: Tuple[int, int],
                position_m: Tuple[float, float] = (0.0, 0.0)) -> 'CameraModel':
        """
        Level camera at `height_m` whose optical axis points along ego heading `yaw`.
        """
        rows, cols = image_size
        intrinsics = np.array([[focal_px, 0.0, cols / 2.0], [0.0, focal_px, rows / 2.0], [0.0, 0.0, 1.0]])
        right = [np.sin(yaw), -np.cos(yaw), 0.0]
        down = [0.0, 0.0, -1.0]
        forward = [np.cos(yaw), np.sin(yaw), 0.0]
        extrinsics = np.eye(4)
        extrinsics[:3, :3] = np.column_stack([right, down, forward])
        extrinsics[:3, 3] = [position_m[0], position_m[1], height_m]
        return cls(intrinsics, extrinsics, image_size)

    def shifted(self, dx_m: float, dy_m: float) -> 'CameraModel':
        extrinsics = self.extrinsics.copy()
        extrinsics[0, 3] += dx_m
        extrinsics[1, 3] += dy_m
        return CameraModel(self.intrinsics, extrinsics, self.image_size)

    def project(self, points_ego: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Ego-frame (N, 3) points to pixel (u, v) and camera depth z.
        """
        cam = (np.asarray(points_ego) - self.translation) @ self.rotation
        pixels = cam @ self.intrinsics.T
        depth = cam[:, 2]
        with np.errstate(divide='ignore', invalid='ignore'):
            uv = pixels[:, :2] / depth[:, None]
        return uv, depth

    def to_dict(self) -> Dict:
        return {
            'intrinsics': self.intrinsics.tolist(),
            'extrinsics': self.extrinsics.tolist(),
            'image_size': list(self.image_size),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'CameraModel':
        return cls(np.array(data['intrinsics']), np.array(data['extrinsics']), tuple(data['image_size']))


@dataclass(frozen=True)
class DepthBins:
    d_min: float
    d_max: float
    num_bins: int

    def __post_init__(self):
        if self.d_min <= 0 or self.d_max <= self.d_min or self.num_bins < 1:
            raise PipelineError('Depth bins need 0 < d_min < d_max and num_bins >= 1, got {}'.format(self))

    @property
    def width(self) -> float:
        return (self.d_max - self.d_min) / self.num_bins

    def centers(self) -> np.ndarray:
        return self.d_min + (np.arange(self.num_bins) + 0.5) * self.width

    def bin_of(self, depth: np.ndarray) -> np.ndarray:
        """
        Bin index of each depth, -1 outside [d_min, d_max).
        """
        index = np.floor((np.asarray(depth) - self.d_min) / self.width).astype(np.int64)
        return np.where((index >= 0) & (index < self.num_bins), index, -1)


class DepthNet(Module):
    """
    Two 1x1 convolutions from camera features to per-pixel depth logits.
    """

    def __init__(self, in_channels: int, hidden: int, num_bins: int, rng: np.random.Generator):
        self.fc1 = Pointwise(in_channels, hidden, rng)
        self.fc2 = Pointwise(hidden, num_bins, rng, gain=0.5)

    def logits(self, image_feat: TensorLike) -> Tensor:
        return self.fc2(basic_ops.relu(self.fc1(image_feat)))


def depth_distribution(logits: TensorLike) -> Tensor:
    """
    Softmax over the bin axis of (D, H, W) logits.
    """
    return basic_ops.softmax(logits, axis=0)


def predict_depth_distribution(image_feat: TensorLike, weights: DepthNet) -> Tensor:
    return depth_distribution(weights.logits(image_feat))


def frustum_points(cam: CameraModel, bins: DepthBins) -> np.ndarray:
    """
    (D, H, W, 3) ego-frame positions of every (bin, pixel) frustum point.
    """
    rows, cols = cam.image_size
    v, u = np.meshgrid(np.arange(rows) + 0.5, np.arange(cols) + 0.5, indexing='ij')
    rays = np.stack([u, v, np.ones_like(u)], axis=-1) @ np.linalg.inv(cam.intrinsics).T
    cam_points = bins.centers()[:, None, None, None] * rays[None]
    return cam_points @ cam.rotation.T + cam.translation


def frustum_cells(cam: CameraModel, bins: DepthBins, grid: BEVGeometry,
                  z_range_m: Optional[Tuple[float, float]] = None) -> np.ndarray:
    """
    (D, H, W) flat BEV cell index y * X + x of every frustum point, -1 where it falls
    outside the grid or the optional height range.
    """
    points = frustum_points(cam, bins)
    ix, iy = grid.cell_of(points[..., 0], points[..., 1])
    inside = grid.contains(ix, iy)
    if z_range_m is not None:
        inside &= (points[..., 2] >= z_range_m[0]) & (points[..., 2] < z_range_m[1])
    return np.where(inside, grid.flat_index(ix, iy), -1)


@Primitive.register
class LiftSplat(Primitive):
    """
    out[c, cell] = sum over (d, h, w) landing in cell of feat[c, h, w] * depth[d, h, w].
    Attributes: `cells` (D, H, W) flat indices with -1 for dropped points, `grid_shape` (Y, X).
    """

    name = 'lift_splat'

    @staticmethod
    def forward(ctx, feat, depth, cells=None, grid_shape=None):
        channels = feat.shape[0]
        num_cells = int(np.prod(grid_shape))
        if is_checked() and (cells.shape != depth.shape or feat.shape[1:] != depth.shape[1:]):
            raise GridError('lift-splat: features {}, depth {} and cells {} disagree'
                            .format(feat.shape, depth.shape, cells.shape))
        valid = cells >= 0
        targets = cells[valid]
        lifted = feat[:, None] * depth[None]
        offsets = (np.arange(channels) * num_cells)[:, None]
        out = np.bincount((offsets + targets[None]).reshape(-1), lifted[:, valid].reshape(-1),
                          minlength=channels * num_cells)
        ctx.feat, ctx.depth, ctx.cells, ctx.valid = feat, depth, cells, valid
        return out.reshape((channels,) + tuple(grid_shape))

    @staticmethod
    def backward(ctx, grad):
        flat = grad.reshape(grad.shape[0], -1)
        gathered = flat[:, np.where(ctx.valid, ctx.cells, 0)] * ctx.valid
        dfeat = (gathered * ctx.depth[None]).sum(axis=1)
        ddepth = (gathered * ctx.feat[:, None]).sum(axis=0)
        return dfeat, ddepth

    @classmethod
    def sample(cls, rng):
        depth, rows, cols = 3, 2, 3
        cells = rng.integers(-1, 6, size=(depth, rows, cols))
        return [rng.normal(size=(2, rows, cols)), rng.uniform(size=(depth, rows, cols))], \
            {'cells': cells, 'grid_shape': (2, 3)}


def lift_splat(image_feat: TensorLike, depth_dist: TensorLike, cam: CameraModel, bins: DepthBins,
               grid: BEVGeometry, z_range_m: Optional[Tuple[float, float]] = None) -> DenseBEVGrid:
    """
    Lifts (C, H, W) camera features along a (D, H, W) depth distribution and sums them into BEV cells.

    Returns:
        DenseBEVGrid with C channels; points outside the grid are dropped
    """
    image_feat, depth_dist = as_tensor(image_feat), as_tensor(depth_dist)
    if depth_dist.shape != (bins.num_bins,) + tuple(cam.image_size):
        raise GridError('Depth distribution {} does not match {} bins over image {}'
                        .format(depth_dist.shape, bins.num_bins, cam.image_size))
    cells = frustum_cells(cam, bins, grid, z_range_m)
    logger.debug('Splatting %d of %d frustum points', int((cells >= 0).sum()), cells.size)
    out = LiftSplat.apply(image_feat, depth_dist, cells=cells, grid_shape=(grid.height, grid.width))
    return DenseBEVGrid(out, grid)


def splat_views(views: Sequence[Tuple[TensorLike, TensorLike, CameraModel]], bins: DepthBins, grid: BEVGeometry,
                z_range_m: Optional[Tuple[float, float]] = None) -> DenseBEVGrid:
    """
    Sums the splats of several (features, depth distribution, camera) views.
    """
    total = None
    for feat, depth, cam in views:
        splat = lift_splat(feat, depth, cam, bins, grid, z_range_m).features
        total = splat if total is None else basic_ops.add(total, splat)
    if total is None:
        raise PipelineError('No camera views to splat')
    return DenseBEVGrid(total, grid)
