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
Robustness and ablation experiments over seed replicates, reported as CSV.

Replicate r uses seed `cfg.seed + r` for the training scenes, the held-out scenes, the
model initialization and the degradation noise; both modes of a replicate see identical data.
"""

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from ..config import RunConfig
from ..metadata import ABLATION_VARIANTS
from .collector import SceneCollector, evaluation_seeds, training_seeds
from .degradation import Degradation
from .evaluation import Metrics, evaluate
from .training import train, with_seed


logger = logging.getLogger(__name__)

METRICS_COLUMNS = ('run_id', 'mode', 'degradation', 'magnitude', 'mask_iou', 'center_mae_m')
DROPS_COLUMNS = ('run_id', 'mode', 'degradation', 'magnitude', 'mask_iou_drop', 'center_mae_drop')
ABLATION_COLUMNS = ('run_id', 'variant', 'seed', 'mask_iou', 'center_mae_m')
ROBUSTNESS_MODES = ('lidar_centric', 'naive_concat')


def write_csv(path: Union[str, Path], columns: Sequence[str], rows: Sequence[Dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=list(columns), lineterminator='\n')
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _cell(row[key]) for key in columns})
    return path


def _cell(value):
    if isinstance(value, float):
        return '{:.6f}'.format(value)
    if isinstance(value, (tuple, list)):
        return ' '.join(str(v) for v in value)
    return value


def relative_drops(clean: Metrics, degraded: Metrics) -> Dict[str, float]:
    """
    IoU drop (clean - degraded) / clean, 0 when clean is 0; center error increase
    (degraded - clean) / max(clean, 1e-9).
    """
    iou_drop = (clean.mask_iou - degraded.mask_iou) / clean.mask_iou if clean.mask_iou > 0 else 0.0
    mae_drop = (degraded.center_mae_m - clean.center_mae_m) / max(clean.center_mae_m, 1e-9)
    return {'mask_iou_drop': iou_drop, 'center_mae_drop': mae_drop}


def replicate_scenes(cfg: RunConfig, seed: int, scene_dir: Optional[Union[str, Path]] = None):
    train_collector = SceneCollector(training_seeds(seed, cfg.training.num_scenes), cfg.generator, scene_dir,
                                     cfg.threads)
    eval_collector = SceneCollector(evaluation_seeds(seed, cfg.evaluation.num_scenes,
                                                     cfg.evaluation.scene_seed_offset),
                                    cfg.generator, scene_dir, cfg.threads)
    return train_collector.collect(), eval_collector.collect()


@dataclass
class RobustnessReport:
    rows: List[Dict] = field(default_factory=list)
    drops: List[Dict] = field(default_factory=list)
    default_magnitudes: Dict[str, float] = field(default_factory=dict)

    def mean_drop(self, mode: str, kind: str, magnitude=None, metric: str = 'mask_iou_drop') -> float:
        magnitude = self.default_magnitudes.get(kind) if magnitude is None else magnitude
        values = [row[metric] for row in self.drops
                  if row['mode'] == mode and row['degradation'] == kind and _same(row['magnitude'], magnitude)]
        return float(np.mean(values)) if values else float('nan')

    def direction_holds(self, kind: str) -> bool:
        """
        True when the LiDAR-centric pipeline drops less than the naive one at the default
        magnitude, on mask IoU or (when IoU drops tie) on center error.
        """
        lidar, naive = self.mean_drop('lidar_centric', kind), self.mean_drop('naive_concat', kind)
        if lidar != naive:
            return lidar < naive
        return (self.mean_drop('lidar_centric', kind, metric='center_mae_drop')
                < self.mean_drop('naive_concat', kind, metric='center_mae_drop'))

    def misalignment_monotone(self) -> bool:
        kind = 'spatial_misalignment'
        magnitudes = sorted({_key(row['magnitude']) for row in self.drops if row['degradation'] == kind})
        means = [self.mean_drop('naive_concat', kind, magnitude) for magnitude in magnitudes]
        return all(b >= a - 1e-12 for a, b in zip(means, means[1:]))

    def write(self, directory: Union[str, Path]) -> List[Path]:
        directory = Path(directory)
        return [write_csv(directory / 'robustness.csv', METRICS_COLUMNS, self.rows),
                write_csv(directory / 'robustness_drops.csv', DROPS_COLUMNS, self.drops)]


def _key(magnitude):
    return tuple(magnitude) if isinstance(magnitude, (list, tuple)) else float(magnitude)


def _same(a, b) -> bool:
    return _key(a) == _key(b)


def _magnitudes(cfg: RunConfig, kind: str) -> List:
    magnitudes = list(cfg.robustness.magnitudes.get(kind, []))
    default = cfg.robustness.default_magnitudes.get(kind)
    if default is not None and not any(_same(default, m) for m in magnitudes):
        magnitudes.append(default)
    return magnitudes


def robustness_experiment(cfg: RunConfig, degradations: Optional[Sequence[str]] = None,
                          scene_dir: Optional[Union[str, Path]] = None,
                          out_dir: Optional[Union[str, Path]] = None) -> RobustnessReport:
    """
    Trains a LiDAR-centric and a naive-concat pipeline per replicate on identical scenes, then
    evaluates both clean and under every degradation kind and magnitude.

    Returns:
        RobustnessReport with one metrics row per (replicate, mode, kind, magnitude) and the
        matching relative drops versus the clean evaluation
    """
    degradations = list(degradations or cfg.robustness.degradations)
    report = RobustnessReport(default_magnitudes=dict(cfg.robustness.default_magnitudes))
    for replicate in range(cfg.robustness.replicates):
        seed = cfg.seed + replicate
        train_scenes, eval_scenes = replicate_scenes(cfg, seed, scene_dir)
        for mode in ROBUSTNESS_MODES:
            variant = 'full' if mode == 'lidar_centric' else 'naive_concat'
            run_cfg = with_seed(cfg, seed).with_pipeline(**ABLATION_VARIANTS[variant])
            run_id = 'r{}-{}'.format(replicate, mode)
            logger.info('Robustness replicate %d: training %s', replicate, mode)
            pipeline = train(run_cfg, train_scenes).pipeline
            clean = evaluate(pipeline, eval_scenes, cfg.evaluation, threads=cfg.threads)
            for kind in degradations:
                for magnitude in _magnitudes(cfg, kind):
                    degraded = evaluate(pipeline, eval_scenes, cfg.evaluation, Degradation(kind, magnitude, seed),
                                        threads=cfg.threads)
                    base = {'run_id': run_id, 'mode': mode, 'degradation': kind, 'magnitude': magnitude}
                    report.rows.append(dict(base, mask_iou=degraded.mask_iou, center_mae_m=degraded.center_mae_m))
                    report.drops.append(dict(base, **relative_drops(clean, degraded)))
    for kind in degradations:
        if not report.direction_holds(kind):
            logger.warning('LiDAR-centric pipeline did not degrade less than naive concat under %s', kind)
    if 'spatial_misalignment' in degradations and not report.misalignment_monotone():
        logger.warning('Naive-concat drops are not monotone in misalignment magnitude')
    if out_dir is not None:
        report.write(out_dir)
    return report


@dataclass
class AblationReport:
    rows: List[Dict] = field(default_factory=list)

    def mean_iou(self, variant: str) -> float:
        values = [row['mask_iou'] for row in self.rows if row['variant'] == variant]
        return float(np.mean(values)) if values else float('nan')

    def full_beats_baseline(self) -> bool:
        return self.mean_iou('full') >= self.mean_iou('baseline_lc')

    def write(self, directory: Union[str, Path]) -> Path:
        return write_csv(Path(directory) / 'ablation.csv', ABLATION_COLUMNS, self.rows)


def ablation_experiment(cfg: RunConfig, variants: Optional[Sequence[str]] = None,
                        scene_dir: Optional[Union[str, Path]] = None,
                        out_dir: Optional[Union[str, Path]] = None) -> AblationReport:
    """
    Trains and evaluates named pipeline variants (see ABLATION_VARIANTS) on identical seeds.
    """
    variants = list(variants or cfg.ablation.variants)
    report = AblationReport()
    for replicate in range(cfg.ablation.replicates):
        seed = cfg.seed + replicate
        train_scenes, eval_scenes = replicate_scenes(cfg, seed, scene_dir)
        for variant in variants:
            run_cfg = with_seed(cfg, seed).with_pipeline(**ABLATION_VARIANTS[variant])
            logger.info('Ablation replicate %d: training %s', replicate, variant)
            pipeline = train(run_cfg, train_scenes).pipeline
            metrics = evaluate(pipeline, eval_scenes, cfg.evaluation, threads=cfg.threads)
            report.rows.append({'run_id': 'r{}-{}'.format(replicate, variant), 'variant': variant, 'seed': seed,
                                'mask_iou': metrics.mask_iou, 'center_mae_m': metrics.center_mae_m})
    if 'full' in variants and 'baseline_lc' in variants and not report.full_beats_baseline():
        logger.warning('Full pipeline mask IoU %.4f is below the baseline %.4f',
                       report.mean_iou('full'), report.mean_iou('baseline_lc'))
    if out_dir is not None:
        report.write(out_dir)
    return report
