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

from lidarbev.errors import UnknownDegradationError
from lidarbev.harness.degradation import (TARGETS, Degradation, inject_degradation, is_zero, one_hot_noise,
                                             random_noise, spatial_misalignment)
from lidarbev.metadata import DEGRADATION_KINDS


class TestInjectors:

    def test_every_kind_has_a_target(self):
        assert set(TARGETS) == set(DEGRADATION_KINDS)

    @pytest.mark.parametrize('kind', DEGRADATION_KINDS)
    def test_zero_magnitude_is_identity(self, rng, kind):
        features = rng.uniform(size=(4, 3, 5))
        assert inject_degradation(features, kind, 0, rng) is features

    def test_unknown_kind(self, rng):
        with pytest.raises(UnknownDegradationError):
            inject_degradation(np.zeros((1, 1, 1)), 'fog', 1.0, rng)
        with pytest.raises(UnknownDegradationError):
            Degradation('fog', 1.0)

    def test_one_hot_noise_replaces_a_fraction(self, rng):
        dist = np.full((4, 20, 20), 0.25)
        noisy = one_hot_noise(dist, 0.5, rng)
        np.testing.assert_allclose(noisy.sum(axis=0), 1.0)
        replaced = noisy.max(axis=0) == 1.0
        assert 0.35 < replaced.mean() < 0.65
        np.testing.assert_array_equal(noisy[:, ~replaced], dist[:, ~replaced])
        assert np.all(dist == 0.25)

    def test_one_hot_noise_everywhere(self, rng):
        noisy = one_hot_noise(np.full((3, 2, 2), 1 / 3), 1.0, rng)
        assert set(np.unique(noisy)) == {0.0, 1.0}

    def test_random_noise_scale(self, rng):
        logits = np.zeros((8, 30, 30))
        noisy = random_noise(logits, 2.0, rng)
        assert 1.8 < noisy.std() < 2.2

    @pytest.mark.parametrize('magnitude,expected', [
        (1, [[0, 1, 2], [0, 4, 5]]),
        ((-1, 0), [[2, 3, 0], [5, 6, 0]]),
        ((0, 1), [[0, 0, 0], [1, 2, 3]]),
        (3, [[0, 0, 0], [0, 0, 0]]),
    ])
    def test_misalignment_shifts_cells(self, magnitude, expected):
        image_bev = np.array([[[1, 2, 3], [4, 5, 6]]], dtype=float)
        np.testing.assert_array_equal(spatial_misalignment(image_bev, magnitude)[0], expected)

    def test_is_zero(self):
        assert is_zero(0) and is_zero(0.0) and is_zero((0, 0))
        assert not is_zero((0, 1)) and not is_zero(0.5)


class TestDegradation:

    def test_applies_only_at_its_stage(self, rng):
        degradation = Degradation('random_noise', 1.0, seed=3)
        logits = rng.normal(size=(4, 2, 3))
        assert degradation.target == 'depth_logits'
        assert degradation.apply('image_bev', logits) is logits
        assert not np.array_equal(degradation.apply('depth_logits', logits), logits)

    def test_seeded_per_view(self, rng):
        logits = rng.normal(size=(4, 2, 3))
        first = Degradation('random_noise', 1.0, seed=3)
        again = Degradation('random_noise', 1.0, seed=3)
        np.testing.assert_array_equal(first.apply('depth_logits', logits), again.apply('depth_logits', logits))
        assert not np.array_equal(first.apply('depth_logits', logits, view=0),
                                  first.apply('depth_logits', logits, view=1))
