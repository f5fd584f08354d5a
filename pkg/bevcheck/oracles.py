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
Naive reference implementations the vectorized kernels are checked against.

Everything here loops element by element and favours obviousness over speed.
"""

import math
from collections import defaultdict
from typing import Dict, Set, Tuple

import numpy as np


def conv2d(x: np.ndarray, weight: np.ndarray, bias: np.ndarray = None, stride: int = 1,
           padding: int = 0) -> np.ndarray:
    channels, height, width = x.shape
    out_channels, _, k, _ = weight.shape
    padded = np.zeros((channels, height + 2 * padding, width + 2 * padding))
    padded[:, padding:padding + height, padding:padding + width] = x
    out_h = (height + 2 * padding - k) // stride + 1
    out_w = (width + 2 * padding - k) // stride + 1
    out = np.zeros((out_channels, out_h, out_w))
    for o in range(out_channels):
        for i in range(out_h):
            for j in range(out_w):
                total = 0.0 if bias is None else bias[o]
                for c in range(channels):
                    for di in range(k):
                        for dj in range(k):
                            total += weight[o, c, di, dj] * padded[c, i * stride + di, j * stride + dj]
                out[o, i, j] = total
    return out


def bilinear(channel: np.ndarray, x: float, y: float) -> float:
    """
    Bilinear sample of a (H, W) map at (x, y); corners outside the map read 0.
    """
    height, width = channel.shape
    x0, y0 = math.floor(x), math.floor(y)
    total = 0.0
    for cy in (y0, y0 + 1):
        for cx in (x0, x0 + 1):
            if 0 <= cx < width and 0 <= cy < height:
                total += (1 - abs(x - cx)) * (1 - abs(y - cy)) * channel[cy, cx]
    return total


def deform_conv(x: np.ndarray, offsets: np.ndarray, modulation: np.ndarray, weight: np.ndarray,
                bias: np.ndarray, base_offsets: np.ndarray) -> np.ndarray:
    _, height, width = x.shape
    groups, out_per_group, in_per_group, points = weight.shape
    out = np.zeros((groups * out_per_group, height, width))
    for g in range(groups):
        for o in range(out_per_group):
            for i in range(height):
                for j in range(width):
                    total = bias[g * out_per_group + o]
                    for k in range(points):
                        sx = j + base_offsets[k, 0] + offsets[g, k, 0, i, j]
                        sy = i + base_offsets[k, 1] + offsets[g, k, 1, i, j]
                        for c in range(in_per_group):
                            total += (weight[g, o, c, k] * modulation[g, k, i, j]
                                      * bilinear(x[g * in_per_group + c], sx, sy))
                    out[g * out_per_group + o, i, j] = total
    return out


def scan_recurrence(u, delta, a, b, c, d) -> np.ndarray:
    """
    h_t = exp(delta_t A) h_{t-1} + delta_t B_t u_t;  y_t = C_t . h_t + D u_t, one scalar at a time.
    """
    length, inner = u.shape
    states = a.shape[1]
    h = [[0.0] * states for _ in range(inner)]
    y = np.zeros((length, inner))
    for t in range(length):
        for e in range(inner):
            acc = 0.0
            for s in range(states):
                h[e][s] = math.exp(delta[t, e] * a[e, s]) * h[e][s] + delta[t, e] * b[t, s] * u[t, e]
                acc += c[t, s] * h[e][s]
            y[t, e] = acc + d[e] * u[t, e]
    return y


def voxel_means(points: np.ndarray, voxel_size, range_m) -> Dict[Tuple[int, int, int], np.ndarray]:
    """
    Hash map from voxel coordinate to the mean row (features, offset from the voxel center)
    of the in-range points falling into it.
    """
    sums = defaultdict(lambda: None)
    counts = defaultdict(int)
    for row in np.asarray(points, dtype=np.float64):
        coord, center = [], []
        inside = True
        for axis in range(3):
            low, high = range_m[axis]
            if not low <= row[axis] < high:
                inside = False
                break
            index = int(math.floor((row[axis] - low) / voxel_size[axis]))
            coord.append(index)
            center.append(low + (index + 0.5) * voxel_size[axis])
        if not inside:
            continue
        value = np.concatenate([row[3:], row[:3] - np.array(center)])
        key = tuple(coord)
        sums[key] = value if sums[key] is None else sums[key] + value
        counts[key] += 1
    return {key: sums[key] / counts[key] for key in counts}


def point_in_box(x: float, y: float, box) -> bool:
    cx, cy, width, length, yaw = box
    corners = []
    for sl, sw in ((1, 1), (1, -1), (-1, -1), (-1, 1)):
        corners.append((cx + sl * length / 2 * math.cos(yaw) - sw * width / 2 * math.sin(yaw),
                        cy + sl * length / 2 * math.sin(yaw) + sw * width / 2 * math.cos(yaw)))
    # same side of every edge of the convex quad
    signs = []
    for (x1, y1), (x2, y2) in zip(corners, corners[1:] + corners[:1]):
        cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
        signs.append(cross)
    tolerance = 1e-9 * max(1.0, length * width)
    return all(s >= -tolerance for s in signs) or all(s <= tolerance for s in signs)


def dilated_cells(occupied: Set[Tuple[int, int]], prob: np.ndarray, tau: float) -> Set[Tuple[int, int]]:
    """
    Occupied cells plus every (x, y) whose probability is strictly above tau.
    """
    cells = set(occupied)
    height, width = prob.shape
    for y in range(height):
        for x in range(width):
            if prob[y, x] > tau:
                cells.add((x, y))
    return cells


def hilbert_is_bijective(indices: np.ndarray, count: int) -> bool:
    return sorted(int(i) for i in indices) == list(range(count))


def unit_steps(points_in_curve_order: np.ndarray) -> bool:
    steps = np.abs(np.diff(points_in_curve_order, axis=0)).sum(axis=1)
    return bool(np.all(steps == 1))
