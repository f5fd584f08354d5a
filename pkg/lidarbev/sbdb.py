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
Semantic-guided BEV dilation: a modulated deformable convolution whose offsets and
modulation scalars are predicted from LiDAR and image BEV features together, while the
sampled values come from the LiDAR map alone.

Shapes used throughout, for G groups and M = kH * kW sampling points:

    offsets     (G, M, 2, H, W)   x then y, in cells, added to the regular kernel grid
    modulation  (G, M, H, W)      sigmoid-bounded
    weight      (G, O/G, C/G, M)
"""

import logging
import threading
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from bevgrad import basic_ops, nn_ops
from bevgrad.errors import ShapeError
from bevgrad.tensor import Primitive, Tensor, TensorLike, as_tensor, is_checked, parameter

from .errors import ConfigError, GridError, PipelineError
from .geometry import DenseBEVGrid
from .modules import ChannelNorm, Conv2d, Module, Pointwise, he_normal


logger = logging.getLogger(__name__)

GUIDANCE_MODES = ('multimodal', 'lidar', 'fusion')

# bilinear corners as (dy, dx); weight derivatives w.r.t. the fractional x and y parts
_CORNERS = ((0, 0), (0, 1), (1, 0), (1, 1))


def _corner_weights(wx: np.ndarray, wy: np.ndarray):
    return (
        ((1 - wx) * (1 - wy), -(1 - wy), -(1 - wx)),
        (wx * (1 - wy), 1 - wy, -wx),
        ((1 - wx) * wy, -wy, 1 - wx),
        (wx * wy, wy, wx),
    )


def regular_grid(kernel_size: int) -> np.ndarray:
    """
    (M, 2) kernel positions p_k as (x, y), row-major over the kernel and centered at 0.
    """
    half = kernel_size // 2
    return np.array([(j - half, i - half) for i in range(kernel_size) for j in range(kernel_size)],
                    dtype=np.float64)


@Primitive.register
class ModulatedDeformConv(Primitive):
    """
    out[g*O_g + o, p] = sum_{c, k} w[g, o, c, k] * m[g, k, p] * x[g*C_g + c](p + p_k + dp[g, k, p]) + b

    Samples are bilinear; corners outside the map read 0. Inputs: x (C, H, W), offsets,
    modulation, weight, bias (O,). Attributes: `base_offsets` (M, 2).
    """

    name = 'modulated_deform_conv'

    @staticmethod
    def forward(ctx, x, offsets, modulation, weight, bias, base_offsets=None):
        channels, height, width = x.shape
        groups, out_per_group, in_per_group, points = weight.shape
        if is_checked():
            if in_per_group * groups != channels:
                raise ShapeError('deform conv: weight {} does not split {} input channels'.format(weight.shape, channels))
            if offsets.shape != (groups, points, 2, height, width) or modulation.shape != (groups, points, height, width):
                raise ShapeError('deform conv: field {} / {} does not match {} groups x {} points over {}x{}'
                                 .format(offsets.shape, modulation.shape, groups, points, height, width))
        rows, cols = np.meshgrid(np.arange(height), np.arange(width), indexing='ij')
        px = cols + base_offsets[:, 0][None, :, None, None] + offsets[:, :, 0]
        py = rows + base_offsets[:, 1][None, :, None, None] + offsets[:, :, 1]
        x0, y0 = np.floor(px), np.floor(py)
        wx, wy = px - x0, py - y0
        x0, y0 = x0.astype(np.int64), y0.astype(np.int64)

        flat = x.reshape(groups, in_per_group, height * width)
        group_index = np.arange(groups)[:, None, None, None]
        sampled = np.zeros((groups, in_per_group, points, height, width))
        corners = []
        for (dy, dx), (coeff, dcoeff_x, dcoeff_y) in zip(_CORNERS, _corner_weights(wx, wy)):
            cx, cy = x0 + dx, y0 + dy
            valid = (cx >= 0) & (cx < width) & (cy >= 0) & (cy < height)
            index = np.where(valid, cy * width + cx, 0)
            values = np.moveaxis(flat[group_index, :, index], -1, 1) * valid[:, None]
            sampled += coeff[:, None] * values
            corners.append((index, valid, coeff, dcoeff_x, dcoeff_y, values))

        columns = modulation[:, None] * sampled
        out = np.einsum('gocm,gcmhw->gohw', weight, columns).reshape(groups * out_per_group, height, width)
        ctx.saved = x.shape, modulation, weight, sampled, columns, corners
        return out + bias[:, None, None]

    @staticmethod
    def backward(ctx, grad):
        shape, modulation, weight, sampled, columns, corners = ctx.saved
        channels, height, width = shape
        groups, out_per_group, in_per_group, points = weight.shape
        grouped = grad.reshape(groups, out_per_group, height, width)

        dbias = grad.sum(axis=(1, 2))
        dweight = np.einsum('gohw,gcmhw->gocm', grouped, columns)
        dcolumns = np.einsum('gocm,gohw->gcmhw', weight, grouped)
        dmodulation = (dcolumns * sampled).sum(axis=1)
        dsampled = dcolumns * modulation[:, None]

        channel_base = (np.arange(channels).reshape(groups, in_per_group) * height * width)[:, :, None, None, None]
        dx_offsets = np.zeros_like(modulation)
        dy_offsets = np.zeros_like(modulation)
        dx_flat = np.zeros(channels * height * width)
        for index, valid, coeff, dcoeff_x, dcoeff_y, values in corners:
            targets = channel_base + index[:, None]
            contribution = dsampled * (coeff * valid)[:, None]
            dx_flat += np.bincount(targets.reshape(-1), contribution.reshape(-1), minlength=dx_flat.size)
            projected = (dsampled * values).sum(axis=1)
            dx_offsets += projected * dcoeff_x
            dy_offsets += projected * dcoeff_y
        doffsets = np.stack([dx_offsets, dy_offsets], axis=2)
        return dx_flat.reshape(shape), doffsets, dmodulation, dweight, dbias

    @classmethod
    def sample(cls, rng):
        groups, points, height, width = 2, 9, 4, 5
        offsets = rng.uniform(-1.4, 1.4, size=(groups, points, 2, height, width))
        # keep samples away from integer positions where bilinear weights have kinks
        fraction = offsets - np.round(offsets)
        offsets[np.abs(fraction) < 0.05] += 0.1
        return [
            rng.normal(size=(4, height, width)),
            offsets,
            rng.uniform(0.05, 0.95, size=(groups, points, height, width)),
            rng.normal(size=(groups, 1, 2, points)),
            rng.normal(size=(2,)),
        ], {'base_offsets': regular_grid(3)}


@dataclass
class DeformationField:
    offsets: Tensor
    modulation: Tensor

    @property
    def extent(self) -> Tuple[int, int]:
        return self.modulation.shape[-2:]


class DeformableConvParams(Module):
    """
    Grouped deformable kernel plus the zero-initialized conv predicting its deformation.
    """

    def __init__(self, in_channels: int, out_channels: int, guidance_channels: int, rng: np.random.Generator,
                 groups: int = 4, kernel_size: int = 3):
        if in_channels % groups or out_channels % groups:
            raise ConfigError('{} groups do not divide {} input / {} output channels'
                              .format(groups, in_channels, out_channels))
        if kernel_size % 2 == 0:
            raise ConfigError('Deformable kernel size must be odd, got {}'.format(kernel_size))
        self.groups, self.kernel_size = groups, kernel_size
        self.base_offsets = regular_grid(kernel_size)
        points = self.num_points
        shape = (groups, out_channels // groups, in_channels // groups, points)
        self.weight = parameter(he_normal(rng, shape, shape[2] * points))
        self.bias = parameter(np.zeros(out_channels))
        self.predictor = Conv2d(guidance_channels, 3 * groups * points, kernel_size, rng, zero=True)

    @property
    def num_points(self) -> int:
        return self.kernel_size ** 2

    @property
    def in_channels(self) -> int:
        return self.weight.shape[0] * self.weight.shape[2]

    def as_dense_kernel(self) -> np.ndarray:
        """
        Block-diagonal (O, C, k, k) kernel of the equivalent regular convolution.
        """
        groups, out_per_group, in_per_group, _ = self.weight.shape
        k = self.kernel_size
        dense = np.zeros((groups * out_per_group, groups * in_per_group, k, k))
        for g in range(groups):
            dense[g * out_per_group:(g + 1) * out_per_group, g * in_per_group:(g + 1) * in_per_group] = \
                self.weight.data[g].reshape(out_per_group, in_per_group, k, k)
        return dense


def predict_deformation(lidar_bev: DenseBEVGrid, image_bev: Optional[DenseBEVGrid],
                        params: DeformableConvParams) -> DeformationField:
    """
    Offsets (unbounded) and modulation (sigmoid) from concat(lidar_bev, image_bev);
    `image_bev=None` conditions on LiDAR features only.
    """
    inputs = [lidar_bev.features]
    if image_bev is not None:
        if image_bev.features.shape[1:] != lidar_bev.features.shape[1:]:
            raise GridError('Deformation guidance extents differ: {} vs {}'
                            .format(lidar_bev.features.shape[1:], image_bev.features.shape[1:]))
        inputs.append(image_bev.features)
    raw = params.predictor(basic_ops.concat(inputs, axis=0))
    groups, points = params.groups, params.num_points
    height, width = raw.shape[1:]
    split = 2 * groups * points
    offsets = basic_ops.reshape(raw[:split], (groups, points, 2, height, width))
    modulation = basic_ops.sigmoid(basic_ops.reshape(raw[split:], (groups, points, height, width)))
    return DeformationField(offsets, modulation)


def deform_conv(x: TensorLike, field: DeformationField, params: DeformableConvParams) -> Tensor:
    return ModulatedDeformConv.apply(x, field.offsets, field.modulation, params.weight, params.bias,
                                     base_offsets=params.base_offsets)


def mm_dcn(lidar_bev: DenseBEVGrid, field: DeformationField, params: DeformableConvParams) -> DenseBEVGrid:
    """
    Deformable convolution that samples the LiDAR map only; image features reach the
    output exclusively through `field`.
    """
    return DenseBEVGrid(deform_conv(lidar_bev.features, field, params), lidar_bev.geometry)


class SBDBBlock(Module):
    """
    F~ = LN(MM-DCN(F_P, F_I)) + F_P;  out = LN(MLP(F~)) + F~
    """

    def __init__(self, channels: int, image_channels: int, rng: np.random.Generator, groups: int = 4,
                 kernel_size: int = 3, ffn_ratio: int = 2, guidance: str = 'multimodal'):
        if guidance not in GUIDANCE_MODES:
            raise ConfigError('Unknown guidance "{}", expected one of {}'.format(guidance, GUIDANCE_MODES))
        self.guidance = guidance
        sampled = channels + (image_channels if guidance == 'fusion' else 0)
        guiding = channels + (0 if guidance == 'lidar' else image_channels)
        self.dcn = DeformableConvParams(sampled, channels, guiding, rng, groups=groups, kernel_size=kernel_size)
        self.norm1 = ChannelNorm(channels)
        self.fc1 = Pointwise(channels, channels * ffn_ratio, rng)
        self.fc2 = Pointwise(channels * ffn_ratio, channels, rng, gain=0.5)
        self.norm2 = ChannelNorm(channels)
        # last deformation field, one per calling thread
        self._fields = threading.local()

    @property
    def last_field(self) -> Optional[DeformationField]:
        """
        Deformation field of the last forward pass made by the calling thread.
        """
        return getattr(self._fields, 'last', None)

    def __call__(self, lidar_bev: DenseBEVGrid, image_bev: DenseBEVGrid) -> DenseBEVGrid:
        field = predict_deformation(lidar_bev, None if self.guidance == 'lidar' else image_bev, self.dcn)
        self._fields.last = field
        if self.guidance == 'fusion':
            source = DenseBEVGrid(basic_ops.concat([lidar_bev.features, image_bev.features], axis=0),
                                  lidar_bev.geometry)
        else:
            source = lidar_bev
        sampled = mm_dcn(source, field, self.dcn)
        mid = basic_ops.add(self.norm1(sampled.features), lidar_bev.features)
        hidden = self.fc2(basic_ops.silu(self.fc1(mid)))
        return DenseBEVGrid(basic_ops.add(self.norm2(hidden), mid), lidar_bev.geometry)


class ImageBEVEncoder(Module):
    """
    Lightweight encoder producing image BEV features at successive half resolutions.
    Each halving is a 3x3 conv, relu and 2x2 average pool.
    """

    def __init__(self, channels: int, halvings: int, rng: np.random.Generator):
        self.stem = Conv2d(channels, channels, 3, rng)
        self.downs = [Conv2d(channels, channels, 3, rng) for _ in range(halvings)]

    def pyramid(self, image_bev: DenseBEVGrid, levels: int) -> List[DenseBEVGrid]:
        """
        Grids at factors 1, 2, ..., 2^(levels - 1); each level is shared by every block at that scale.
        """
        if levels - 1 > len(self.downs):
            raise PipelineError('Encoder has {} halvings, {} levels requested'.format(len(self.downs), levels))
        grid = DenseBEVGrid(basic_ops.relu(self.stem(image_bev.features)), image_bev.geometry)
        grids = [grid]
        for conv in self.downs[:levels - 1]:
            geometry = grid.geometry.downsampled(2)
            grid = DenseBEVGrid(nn_ops.avg_pool2d(basic_ops.relu(conv(grid.features)), 2), geometry)
            grids.append(grid)
        return grids


def downsample_image_bev(image_bev: DenseBEVGrid, factor: int, encoder: ImageBEVEncoder) -> DenseBEVGrid:
    """
    Encodes the image BEV map down by `factor`, a power of two dividing both extents.
    """
    if factor < 1 or factor & (factor - 1):
        raise GridError('Downsampling factor must be a power of two, got {}'.format(factor))
    width, height = image_bev.geometry.grid_size
    if width % factor or height % factor:
        raise GridError('Factor {} does not divide the {}x{} grid'.format(factor, width, height))
    return encoder.pyramid(image_bev, factor.bit_length())[-1]


class SamplingLocation(NamedTuple):
    group: int
    k: int
    x: float
    y: float
    modulation: float


def sampling_locations(field: DeformationField, base_offsets: np.ndarray, query_cell: Tuple[int, int],
                       threshold: float) -> List[SamplingLocation]:
    """
    Absolute sampling positions p_0 + p_k + dp_k of one output cell, across groups,
    keeping points whose modulation is at least `threshold`.
    """
    qx, qy = (int(v) for v in query_cell)
    height, width = field.extent
    if not (0 <= qx < width and 0 <= qy < height):
        raise GridError('Query cell {} outside the {}x{} grid'.format(query_cell, width, height))
    offsets = field.offsets.data[:, :, :, qy, qx]
    modulation = field.modulation.data[:, :, qy, qx]
    locations = []
    for g in range(offsets.shape[0]):
        for k in range(offsets.shape[1]):
            if modulation[g, k] >= threshold:
                locations.append(SamplingLocation(
                    g, k,
                    float(qx + base_offsets[k, 0] + offsets[g, k, 0]),
                    float(qy + base_offsets[k, 1] + offsets[g, k, 1]),
                    float(modulation[g, k]),
                ))
    return locations


def export_sampling_locations(block: SBDBBlock, query_cell: Tuple[int, int],
                              threshold: float = 0.01) -> List[SamplingLocation]:
    if block.last_field is None:
        raise PipelineError('Block has not been run forward; no sampling locations to export')
    return sampling_locations(block.last_field, block.dcn.base_offsets, query_cell, threshold)
