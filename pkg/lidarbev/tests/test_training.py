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

import math
from dataclasses import replace

import numpy as np
import pytest

from bevgrad.tensor import Tensor
from lidarbev.errors import PipelineError, TrainingDivergedError
from lidarbev.geometry import BEVGeometry
from lidarbev.harness import training
from lidarbev.harness.pipeline import build_pipeline
from lidarbev.harness.scenes import generate_scene
from lidarbev.harness.training import (CONFIG_FILE, WEIGHTS_FILE, LossTerms, TrainingResult, center_targets,
                                          checkpoint_config, load_checkpoint, loss_summary, pipeline_loss,
                                          save_checkpoint, scene_targets, train, with_seed)


GRID = BEVGeometry((16, 16), (1.0, 1.0), (-8.0, -8.0))


def _with_training(cfg, **overrides):
    return replace(cfg, training=replace(cfg.training, **overrides))


class TestTargets:

    def test_center_on_a_cell_center(self):
        target = center_targets(np.array([[0.5, 0.5]]), GRID, 0.5)
        assert target.sum() == 1.0 and target[8, 8] == 1.0

    def test_containing_cell_always_marked(self):
        target = center_targets(np.array([[0.2, -0.7]]), GRID, 0.1)
        assert target.sum() == 1.0 and target[7, 8] == 1.0

    def test_radius_covers_neighbours(self):
        assert center_targets(np.array([[0.5, 0.5]]), GRID, 1.0).sum() == 5.0

    def test_outside_grid(self):
        assert not center_targets(np.array([[20.0, 0.0]]), GRID, 0.5).any()

    def test_scene_targets(self, scene):
        targets = scene_targets(scene, GRID, 0.5)
        assert targets.mask.shape == targets.centers.shape == (16, 16)
        assert targets.mask.any() and targets.centers.any()


class TestLoss:

    def test_dilation_term_only_with_svdb(self, tiny_config, scene):
        targets = scene_targets(scene, GRID, 0.5)
        for use_svdb in (True, False):
            cfg = tiny_config.with_pipeline(use_svdb=use_svdb)
            pipeline = build_pipeline(cfg.pipeline, cfg.generator.image_channels)
            terms = pipeline_loss(pipeline(scene), targets, cfg)
            assert (terms.svdb is not None) == use_svdb
            expected = terms.mask.item() + cfg.training.center_loss_weight * terms.center.item()
            if use_svdb:
                expected += cfg.training.svdb_loss_weight * terms.svdb.item()
            assert terms.total.item() == pytest.approx(expected, rel=1e-12)


class TestTrain:

    def test_records_curves(self, tiny_config, scene):
        result = train(tiny_config, [scene, generate_scene(4, tiny_config.generator)])
        assert len(result.loss_curve) == len(result.mask_loss_curve) == 3
        assert all(math.isfinite(loss) for loss in result.loss_curve)
        assert result.checkpoint is None

    def test_zero_learning_rate_keeps_loss(self, tiny_config, scene):
        cfg = _with_training(tiny_config, lr=0.0)
        result = train(cfg, [scene])
        assert len(set(result.loss_curve)) == 1
        initial = build_pipeline(cfg.pipeline, cfg.generator.image_channels, cfg.seed).state_dict()
        for path, value in result.pipeline.state_dict().items():
            np.testing.assert_array_equal(value, initial[path], err_msg=path)

    def test_needs_scenes(self, tiny_config):
        with pytest.raises(PipelineError):
            train(tiny_config, [])

    def test_non_finite_loss_raises(self, tiny_config, scene, mocker):
        def nan_loss(*args):
            nan = Tensor(np.array(float('nan')))
            return LossTerms(nan, nan, nan)

        mocker.patch.object(training, 'pipeline_loss', side_effect=nan_loss)
        with pytest.raises(TrainingDivergedError) as info:
            train(tiny_config, [scene])
        assert info.value.step == 0
        assert info.value.diagnostics()['step'] == 0

    def test_diverged_message(self):
        error = TrainingDivergedError(7, [0.5, float('inf')], ['mask_head.conv1.weight'])
        assert 'step 7' in str(error) and 'mask_head.conv1.weight' in str(error)
        assert error.diagnostics() == {'step': 7, 'recent_losses': [0.5, float('inf')],
                                       'bad_params': ['mask_head.conv1.weight']}

    @pytest.mark.slow
    def test_mask_loss_falls(self, tiny_config):
        cfg = _with_training(tiny_config, steps=40, num_scenes=4)
        scenes = [generate_scene(seed, cfg.generator) for seed in range(4)]
        assert loss_summary(train(cfg, scenes))['ratio'] < 1.0


class TestCheckpoint:

    def test_round_trip(self, tmp_path, tiny_config, scene):
        result = train(tiny_config, [scene], checkpoint_dir=tmp_path / 'checkpoint')
        assert (result.checkpoint / WEIGHTS_FILE).is_file() and (result.checkpoint / CONFIG_FILE).is_file()
        loaded = load_checkpoint(result.checkpoint)
        np.testing.assert_array_equal(loaded(scene).mask_logits.data, result.pipeline(scene).mask_logits.data)
        assert checkpoint_config(result.checkpoint) == tiny_config

    def test_naive_concat_round_trip(self, tmp_path, tiny_config, scene):
        cfg = tiny_config.with_pipeline(mode='naive_concat')
        pipeline = build_pipeline(cfg.pipeline, cfg.generator.image_channels, 3)
        save_checkpoint(tmp_path, pipeline, cfg)
        assert load_checkpoint(tmp_path).cfg.mode == 'naive_concat'

    def test_missing_config(self, tmp_path):
        with pytest.raises(PipelineError, match=CONFIG_FILE):
            load_checkpoint(tmp_path)


class TestSummary:

    def test_ratio(self, tiny_config):
        result = TrainingResult(None, tiny_config, mask_loss_curve=[0.8, 0.5, 0.4])
        assert loss_summary(result) == {'initial_mask_loss': 0.8, 'final_mask_loss': 0.4, 'ratio': 0.5}

    def test_empty_curve(self, tiny_config):
        assert math.isnan(loss_summary(TrainingResult(None, tiny_config))['ratio'])

    def test_with_seed(self, tiny_config):
        assert with_seed(tiny_config, 9).seed == 9 and tiny_config.seed == 0
