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
from bevgrad.optim import AdamW
from bevgrad.tensor import Tape, backward, parameter


def quadratic_step(optimizer, x, target):
    optimizer.zero_grad()
    with Tape():
        diff = x - target
        loss = basic_ops.sum(diff * diff)
    value = loss.item()
    backward(loss)
    optimizer.step()
    return value


class TestAdamW:

    def test_zero_lr_keeps_parameters(self, rng):
        start = rng.normal(size=4)
        x = parameter(start)
        optimizer = AdamW([('x', x)], lr=0.0)
        losses = [quadratic_step(optimizer, x, np.ones(4)) for _ in range(5)]
        assert np.array_equal(x.data, start)
        assert max(losses) - min(losses) <= 1e-12

    def test_descends(self, rng):
        x = parameter(rng.normal(size=4))
        optimizer = AdamW([('x', x)], lr=0.1, weight_decay=0.0)
        losses = [quadratic_step(optimizer, x, np.ones(4)) for _ in range(100)]
        assert losses[-1] < 0.05 * losses[0]

    def test_decoupled_decay_without_gradient_signal(self):
        x = parameter(np.array([2.0]))
        x.grad = np.zeros(1)
        optimizer = AdamW([('x', x)], lr=0.5, weight_decay=0.1)
        optimizer.step()
        assert x.data[0] == pytest.approx(2.0 * (1 - 0.05))

    def test_state_round_trip(self, rng):
        x = parameter(rng.normal(size=3))
        optimizer = AdamW([('x', x)])
        quadratic_step(optimizer, x, np.zeros(3))
        restored = AdamW([('x', parameter(x.data))])
        restored.load_state(optimizer.state())
        assert restored.steps == 1
        assert np.array_equal(restored.first_moment['x'], optimizer.first_moment['x'])

    def test_negative_lr_rejected(self):
        with pytest.raises(ValueError):
            AdamW([], lr=-1.0)
