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

import numpy as np
import pytest

from bevgrad import nn_ops
from bevgrad.errors import ShapeError
from bevgrad.tensor import checked_mode


def naive_conv2d(x, w, b, stride, padding):
    channels, height, width = x.shape
    out_channels, _, kh, kw = w.shape
    padded = np.zeros((channels, height + 2 * padding, width + 2 * padding))
    padded[:, padding:padding + height, padding:padding + width] = x
    out_h = (height + 2 * padding - kh) // stride + 1
    out_w = (width + 2 * padding - kw) // stride + 1
    out = np.zeros((out_channels, out_h, out_w))
    for o in range(out_channels):
        for i in range(out_h):
            for j in range(out_w):
                total = b[o]
                for c in range(channels):
                    for u in range(kh):
                        for v in range(kw):
                            total += w[o, c, u, v] * padded[c, i * stride + u, j * stride + v]
                out[o, i, j] = total
    return out


class TestConv2d:

    def test_identity_kernel(self, rng):
        x = rng.normal(size=(1, 3, 3))
        out = nn_ops.conv2d(x, np.ones((1, 1, 1, 1)))
        np.testing.assert_array_equal(out.data, x)

    def test_even_sum_kernel_rejected(self):
        # a 2x2 sum kernel is even, which the primitive does not accept
        with pytest.raises(ShapeError):
            nn_ops.conv2d(np.ones((1, 2, 2)), np.ones((1, 1, 2, 2)))

    def test_sum_kernel(self):
        out = nn_ops.conv2d(np.ones((1, 3, 3)), np.ones((1, 1, 3, 3)))
        np.testing.assert_array_equal(out.data, [[[9.0]]])

    @pytest.mark.parametrize('stride,padding', [(1, 0), (1, 1), (2, 1), (3, 0)])
    def test_matches_naive_loops(self, rng, stride, padding):
        size = 8 if (8 + 2 * padding - 3) % stride == 0 else 9
        x = rng.normal(size=(2, size, size))
        w = rng.normal(size=(4, 2, 3, 3))
        b = rng.normal(size=4)
        out = nn_ops.conv2d(x, w, b, stride=stride, padding=padding)
        np.testing.assert_allclose(out.data, naive_conv2d(x, w, b, stride, padding), rtol=0, atol=1e-12)

    def test_non_exact_extent_checked(self):
        with pytest.raises(ShapeError):
            nn_ops.conv2d(np.ones((1, 8, 8)), np.ones((1, 1, 3, 3)), stride=2, padding=1)

    def test_non_exact_extent_unchecked(self):
        with checked_mode(False):
            out = nn_ops.conv2d(np.ones((1, 8, 8)), np.ones((1, 1, 3, 3)), stride=2, padding=1)
        assert out.shape == (1, 4, 4)

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError):
            nn_ops.conv2d(np.ones((2, 4, 4)), np.ones((1, 3, 3, 3)))


class TestLayerNorm:

    def test_constant_input(self):
        out = nn_ops.layer_norm(np.full((2, 4), 3.0), np.ones(4), np.zeros(4))
        np.testing.assert_array_equal(out.data, np.zeros((2, 4)))

    def test_zero_gamma(self, rng):
        beta = np.array([0.5, -1.0, 2.0])
        out = nn_ops.layer_norm(rng.normal(size=(5, 3)), np.zeros(3), beta)
        np.testing.assert_array_equal(out.data, np.broadcast_to(beta, (5, 3)))

    def test_direct_formula(self, rng):
        x, gamma, beta = rng.normal(size=(4, 6)), rng.normal(size=6), rng.normal(size=6)
        eps = 1e-5
        mu = x.mean(axis=-1, keepdims=True)
        var = x.var(axis=-1, keepdims=True)
        expected = (x - mu) / np.sqrt(var + eps) * gamma + beta
        np.testing.assert_allclose(nn_ops.layer_norm(x, gamma, beta, eps).data, expected, atol=1e-10)

    def test_channel_axis_of_map(self, rng):
        x = rng.normal(size=(3, 2, 2))
        out = nn_ops.channel_layer_norm(x, np.ones(3), np.zeros(3)).data
        np.testing.assert_allclose(out.mean(axis=0), 0.0, atol=1e-12)


class TestFocalLoss:

    def test_perfect_prediction(self):
        target = np.array([[1.0, 0.0], [0.0, 1.0]])
        assert nn_ops.focal_loss(target, target).item() < 1e-4

    def test_reduces_to_bce(self, rng):
        prob = rng.uniform(0.01, 0.99, size=(4, 4))
        target = (rng.uniform(size=(4, 4)) > 0.5).astype(float)
        bce = -(target * np.log(prob) + (1 - target) * np.log(1 - prob)).mean()
        loss = nn_ops.focal_loss(prob, target, alpha=1.0, gamma=0.0).item()
        assert abs(loss - bce) < 1e-10

    def test_scalar_oracle(self, rng):
        prob = rng.uniform(0.0, 1.0, size=12)
        target = (rng.uniform(size=12) > 0.5).astype(float)
        total = 0.0
        for p, t in zip(prob, target):
            p = min(max(p, 1e-6), 1 - 1e-6)
            p_t = p if t == 1 else 1 - p
            total += -0.25 * (1 - p_t) ** 2 * np.log(p_t)
        loss = nn_ops.focal_loss(prob, target, alpha=0.25, gamma=2.0).item()
        assert abs(loss - total / 12) < 1e-12

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            nn_ops.focal_loss(np.full(3, 0.5), np.zeros(4))


class TestPooling:

    def test_avg_pool(self):
        x = np.arange(16.0).reshape(1, 4, 4)
        np.testing.assert_array_equal(nn_ops.avg_pool2d(x).data, [[[2.5, 4.5], [10.5, 12.5]]])

    def test_avg_pool_indivisible(self):
        with pytest.raises(ShapeError):
            nn_ops.avg_pool2d(np.ones((1, 3, 4)))

    def test_upsample(self):
        out = nn_ops.upsample_nearest(np.array([[[1.0, 2.0]]]), 2).data
        np.testing.assert_array_equal(out, [[[1, 1, 2, 2], [1, 1, 2, 2]]])


class TestCausalConv1d:

    def test_reads_only_past(self):
        x = np.zeros((6, 1))
        x[3, 0] = 1.0
        out = nn_ops.causal_conv1d(x, np.array([[1.0, 2.0, 3.0]]), np.zeros(1)).data[:, 0]
        np.testing.assert_array_equal(out, [0, 0, 0, 3, 2, 1])
