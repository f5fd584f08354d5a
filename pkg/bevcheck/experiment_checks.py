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
Opt-in checks that train pipelines: the desk-scale training gates, bit-identical
reproducibility and the expected direction of the ablation and robustness results.
"""

import logging
from dataclasses import replace
from typing import List, Tuple

import numpy as np

from lidarbev.harness.evaluation import evaluate
from lidarbev.harness.experiments import ablation_experiment, replicate_scenes, robustness_experiment
from lidarbev.harness.training import loss_summary, train

from bevcheck.common import Check
from bevcheck.runners import CheckRunner


logger = logging.getLogger(__name__)


@CheckRunner.register
class CheckTrainingGate(Check):

    key = 'trainingGate'
    version = (0, 1, 0)

    def run(self) -> List[Tuple]:
        params = self.parameters
        cfg = self.collector.run_config
        self.failures = []
        train_scenes, eval_scenes = replicate_scenes(cfg, cfg.seed)
        result = train(cfg, train_scenes)
        ratio = loss_summary(result)['ratio']
        if not ratio <= params['max_loss_ratio']:
            self.failures.append(('final / initial mask loss', '<= {:g}'.format(params['max_loss_ratio']),
                                  float(ratio)))
        metrics = evaluate(result.pipeline, eval_scenes, cfg.evaluation, threads=cfg.threads)
        logger.info('Training gate: loss ratio %.4f, held-out mask IoU %.4f', ratio, metrics.mask_iou)
        if metrics.mask_iou < params['min_mask_iou']:
            self.failures.append(('held-out mask IoU', '>= {:g}'.format(params['min_mask_iou']),
                                  float(metrics.mask_iou)))
        return self.failures


@CheckRunner.register
class CheckTrainingDeterminism(Check):
    """
    Two single-threaded runs from the same seed give identical loss curves and weights.
    """

    key = 'trainingDeterminism'
    version = (0, 1, 0)

    def run(self) -> List[Tuple]:
        params = self.parameters
        base = self.collector.run_config
        cfg = replace(base, threads=1,
                      training=replace(base.training, steps=int(params['steps']), num_scenes=int(params['num_scenes'])))
        self.failures = []
        scenes, _ = replicate_scenes(cfg, cfg.seed)
        first, second = train(cfg, scenes), train(cfg, scenes)
        if first.loss_curve != second.loss_curve:
            self.failures.append(('loss curve', first.loss_curve, second.loss_curve))
        state, again = first.pipeline.state_dict(), second.pipeline.state_dict()
        differing = sorted(path for path in state if not np.array_equal(state[path], again[path]))
        if differing:
            self.failures.append(('weights', 'bit-identical', ', '.join(differing)))
        return self.failures


@CheckRunner.register
class CheckAblationDirection(Check):

    key = 'ablationDirection'
    version = (0, 1, 0)

    def run(self) -> List[Tuple]:
        report = ablation_experiment(self.collector.run_config, variants=self.parameters['variants'],
                                     out_dir=self.collector.output_dir)
        self.failures = []
        if not report.full_beats_baseline():
            self.failures.append(('mean mask IoU, full vs baseline_lc', '>= {:.4f}'.format(
                report.mean_iou('baseline_lc')), float(report.mean_iou('full'))))
        return self.failures


@CheckRunner.register
class CheckRobustnessDirection(Check):

    key = 'robustnessDirection'
    version = (0, 1, 0)

    def run(self) -> List[Tuple]:
        cfg = self.collector.run_config
        report = robustness_experiment(cfg, out_dir=self.collector.output_dir)
        self.failures = []
        for kind in cfg.robustness.degradations:
            if not report.direction_holds(kind):
                self.failures.append(('{} mask IoU drop, LiDAR-centric vs naive'.format(kind),
                                      '< {:.4f}'.format(report.mean_drop('naive_concat', kind)),
                                      float(report.mean_drop('lidar_centric', kind))))
        if 'spatial_misalignment' in cfg.robustness.degradations and not report.misalignment_monotone():
            self.failures.append(('naive-concat drop versus misalignment', 'non-decreasing', 'decreasing'))
        return self.failures
