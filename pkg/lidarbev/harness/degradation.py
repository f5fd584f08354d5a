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
Inference-time corruptions of the image branch used by the robustness experiment.
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np

from ..errors import UnknownDegradationError
from ..metadata import DEGRADATION_KINDS


logger = logging.getLogger(__name__)

# pipeline stage each kind acts on
TARGETS = {
    'one_hot_noise': 'depth_distribution',
    'random_noise': 'depth_logits',
    'spatial_misalignment': 'image_bev',
}

Magnitude = Union[float, int, Sequence[int]]


def _shift_cells(magnitude: Magnitude) -> Tuple[int, int]:
    if np.ndim(magnitude) == 0:
        return int(round(float(magnitude))), 0
    dx, dy = magnitude
    return int(dx), int(dy)


def is_zero(magnitude: Magnitude) -> bool:
    return not np.any(np.asarray(magnitude, dtype=np.float64))


def one_hot_noise(depth_dist: np.ndarray, fraction: float, rng: np.random.Generator) -> np.ndarray:
    """
    Replaces the (D,) depth distribution of a `fraction` of pixels with a random one-hot bin.
    """
    bins, rows, cols = depth_dist.shape
    out = depth_dist.copy()
    chosen = rng.uniform(size=(rows, cols)) < fraction
    picks = rng.integers(bins, size=(rows, cols))
    out[:, chosen] = 0.0
    rr, cc = np.nonzero(chosen)
    out[picks[rr, cc], rr, cc] = 1.0
    return out


def random_noise(depth_logits: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    return depth_logits + rng.normal(scale=sigma, size=depth_logits.shape)


def spatial_misalignment(image_bev: np.ndarray, magnitude: Magnitude) -> np.ndarray:
    """
    Translates a (C, Y, X) map by (dx, dy) cells; vacated cells are zero.
    """
    dx, dy = _shift_cells(magnitude)
    out = np.zeros_like(image_bev)
    _, rows, cols = image_bev.shape
    if abs(dx) >= cols or abs(dy) >= rows:
        return out
    src_x = slice(max(0, -dx), cols - max(0, dx))
    dst_x = slice(max(0, dx), cols - max(0, -dx))
    src_y = slice(max(0, -dy), rows - max(0, dy))
    dst_y = slice(max(0, dy), rows - max(0, -dy))
    out[:, dst_y, dst_x] = image_bev[:, src_y, src_x]
    return out


def inject_degradation(features: np.ndarray, kind: str, magnitude: Magnitude,
                       rng: np.random.Generator = None) -> np.ndarray:
    """
    Applies one corruption to the features it targets.

    Args:
        features: depth distribution (D, H, W) for 'one_hot_noise', depth logits for
            'random_noise', image BEV (C, Y, X) for 'spatial_misalignment'
        kind: one of DEGRADATION_KINDS
        magnitude: pixel fraction, logit noise sigma, or shift in cells (int or (dx, dy))
        rng: noise source, a fresh default generator when omitted

    Returns:
        the input itself when the magnitude is zero, else a corrupted copy
    """
    if kind not in DEGRADATION_KINDS:
        raise UnknownDegradationError('Unknown degradation "{}", expected one of {}'.format(kind, DEGRADATION_KINDS))
    if is_zero(magnitude):
        return features
    rng = rng if rng is not None else np.random.default_rng()
    if kind == 'one_hot_noise':
        return one_hot_noise(features, float(magnitude), rng)
    if kind == 'random_noise':
        return random_noise(features, float(magnitude), rng)
    return spatial_misalignment(features, magnitude)


@dataclass(frozen=True)
class Degradation:
    """
    A corruption bound to a seed, applied by the pipeline at the stage `TARGETS[kind]`.
    """

    kind: str
    magnitude: Magnitude
    seed: int = 0

    def __post_init__(self):
        if self.kind not in DEGRADATION_KINDS:
            raise UnknownDegradationError('Unknown degradation "{}", expected one of {}'
                                          .format(self.kind, DEGRADATION_KINDS))

    @property
    def target(self) -> str:
        return TARGETS[self.kind]

    def apply(self, stage: str, features: np.ndarray, view: int = 0) -> np.ndarray:
        if stage != self.target:
            return features
        rng = np.random.default_rng([self.seed, view])
        return inject_degradation(features, self.kind, self.magnitude, rng)
