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

from bevgrad import basic_ops
from bevgrad.tensor import Tape, backward
from lidarbev.errors import PipelineError
from lidarbev.modules import ChannelNorm, Conv2d, ConvHead, Linear, Module, Pointwise, parameter_paths


class Tiny(Module):

    def __init__(self, rng):
        self.head = ConvHead(2, 3, rng, prior=-1.5)
        self.layers = [Linear(2, 2, rng), Linear(2, 1, rng, bias=False)]
        self.scale = 2.0
        self._cache = Linear(1, 1, rng)


class TestModule:

    def test_parameter_paths(self, rng):
        assert parameter_paths(Tiny(rng)) == [
            'head.conv1.weight', 'head.conv1.bias', 'head.conv2.weight', 'head.conv2.bias',
            'layers.0.weight', 'layers.0.bias', 'layers.1.weight',
        ]

    def test_state_round_trip(self, rng):
        first, second = Tiny(rng), Tiny(rng)
        second.load_state_dict(first.state_dict())
        for (path, a), (_, b) in zip(first.named_parameters(), second.named_parameters()):
            np.testing.assert_array_equal(a.data, b.data, err_msg=path)

    def test_state_is_a_copy(self, rng):
        model = Tiny(rng)
        state = model.state_dict()
        state['layers.0.bias'][:] = 5.0
        assert not model.layers[0].bias.data.any()

    def test_missing_and_unexpected_keys(self, rng):
        model = Tiny(rng)
        state = model.state_dict()
        state.pop('layers.1.weight')
        state['layers.2.weight'] = np.zeros((1, 1))
        with pytest.raises(PipelineError, match='layers.1.weight.*layers.2.weight'):
            model.load_state_dict(state)

    def test_shape_mismatch(self, rng):
        model = Tiny(rng)
        state = model.state_dict()
        state['layers.0.bias'] = np.zeros(3)
        with pytest.raises(PipelineError, match='layers.0.bias'):
            model.load_state_dict(state)

    def test_zero_grad(self, rng):
        model = Tiny(rng)
        with Tape():
            loss = basic_ops.sum(model.layers[0](rng.normal(size=(4, 2))))
        backward(loss)
        assert model.layers[0].weight.grad is not None
        model.zero_grad()
        assert all(param.grad is None or not param.grad.any() for _, param in model.named_parameters())

    def test_num_parameters(self, rng):
        assert Linear(3, 2, rng).num_parameters() == 8


class TestLayers:

    def test_conv_keeps_extent(self, rng):
        assert Conv2d(2, 5, 3, rng)(rng.normal(size=(2, 4, 6))).shape == (5, 4, 6)

    def test_zero_init(self, rng):
        conv = Conv2d(2, 3, 3, rng, zero=True)
        assert not conv(rng.normal(size=(2, 4, 4))).data.any()
        assert not Pointwise(2, 3, rng, zero=True).weight.data.any()

    def test_head_prior(self, rng):
        head = ConvHead(2, 3, rng, out_channels=2, prior=-2.0)
        np.testing.assert_array_equal(head.conv2.bias.data, [-2.0, -2.0])
        assert head(rng.normal(size=(2, 4, 4))).shape == (2, 4, 4)

    def test_channel_norm(self, rng):
        out = ChannelNorm(4)(rng.normal(loc=3.0, size=(4, 2, 3))).data
        np.testing.assert_allclose(out.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.std(axis=0), 1.0, atol=1e-2)
