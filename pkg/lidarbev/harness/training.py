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
End-to-end training of a pipeline on toy scenes and checkpoint persistence.

A checkpoint is a directory holding `weights.bin` (tensor snapshot state keyed by parameter
path), its `weights.json` mirror and the resolved `config.json` the pipeline was built from.
"""

import json
import logging
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from bevgrad import basic_ops, nn_ops, snapshot
from bevgrad.errors import NonFiniteError
from bevgrad.optim import AdamW
from bevgrad.tensor import Tape, Tensor, backward

from ..config import RunConfig, build_config
from ..errors import PipelineError, TrainingDivergedError
from ..geometry import BEVGeometry
from ..svdb import mask_ground_truth
from .pipeline import Pipeline, PipelineOutput, build_pipeline
from .scenes import Scene


logger = logging.getLogger(__name__)

WEIGHTS_FILE = 'weights.bin'
CONFIG_FILE = 'config.json'
RECENT_LOSSES = 5


def center_targets(centers_m: np.ndarray, grid: BEVGeometry, radius_m: float) -> np.ndarray:
    """
    (Y, X) 0/1 heatmap target: cells whose centers lie within `radius_m` of a box center,
    plus the cell containing each in-grid center.
    """
    target = np.zeros((grid.height, grid.width))
    xs, ys = grid.cell_centers()
    for cx, cy in np.asarray(centers_m, dtype=np.float64).reshape(-1, 2):
        target[(xs - cx) ** 2 + (ys - cy) ** 2 <= radius_m ** 2] = 1.0
        ix, iy = grid.cell_of(np.array([cx]), np.array([cy]))
        if grid.contains(ix, iy)[0]:
            target[iy[0], ix[0]] = 1.0
    return target


@dataclass
class SceneTargets:
    mask: np.ndarray
    centers: np.ndarray


def scene_targets(scene: Scene, grid: BEVGeometry, radius_m: float) -> SceneTargets:
    return SceneTargets(mask_ground_truth(scene.bev_boxes(), grid), center_targets(scene.centers(), grid, radius_m))


@dataclass
class LossTerms:
    total: Tensor
    mask: Tensor
    center: Tensor
    svdb: Optional[Tensor] = None


def pipeline_loss(output: PipelineOutput, targets: SceneTargets, cfg: RunConfig) -> LossTerms:
    """
    Focal mask loss + weighted focal center loss, plus the weighted focal loss of the
    dilation block's foreground field when the pipeline has one.
    """
    train = cfg.training
    mask = nn_ops.focal_loss(output.mask_prob, targets.mask, train.focal_alpha, train.focal_gamma)
    center = nn_ops.focal_loss(output.center_prob, targets.centers, train.focal_alpha, train.focal_gamma)
    total = basic_ops.add(mask, basic_ops.scale(center, train.center_loss_weight))
    svdb = None
    if output.svdb_field is not None:
        svdb = nn_ops.focal_loss(output.svdb_field.prob, targets.mask, train.focal_alpha, train.focal_gamma)
        total = basic_ops.add(total, basic_ops.scale(svdb, train.svdb_loss_weight))
    return LossTerms(total, mask, center, svdb)


@dataclass
class TrainingResult:
    pipeline: Pipeline
    config: RunConfig
    loss_curve: List[float] = field(default_factory=list)
    mask_loss_curve: List[float] = field(default_factory=list)
    checkpoint: Optional[Path] = None


def _non_finite_grads(pipeline: Pipeline) -> List[str]:
    return [path for path, param in pipeline.named_parameters()
            if param.grad is not None and not np.all(np.isfinite(param.grad))]


def train(cfg: RunConfig, scenes: Sequence[Scene], checkpoint_dir: Optional[Union[str, Path]] = None) -> TrainingResult:
    """
    Trains a pipeline built from `cfg` (initialized from `cfg.seed`) with AdamW.

    Step t uses `batch_size` scenes starting at (t * batch_size) mod len(scenes); the batch
    loss is the mean of the per-scene losses.

    Args:
        cfg: resolved run config
        scenes: at least one training scene
        checkpoint_dir: when given, the trained weights are saved there

    Returns:
        TrainingResult with the per-step total and mask focal loss curves

    Raises:
        TrainingDivergedError: when a loss or gradient stops being finite
    """
    if not scenes:
        raise PipelineError('Training needs at least one scene')
    train_cfg = cfg.training
    pipeline = build_pipeline(cfg.pipeline, cfg.generator.image_channels, cfg.seed)
    targets = [scene_targets(scene, pipeline.grid, train_cfg.center_radius_m) for scene in scenes]
    optimizer = AdamW(pipeline.named_parameters(), lr=train_cfg.lr, betas=tuple(train_cfg.betas),
                      weight_decay=train_cfg.weight_decay)
    result = TrainingResult(pipeline, cfg)
    recent = deque(maxlen=RECENT_LOSSES)
    batch = min(train_cfg.batch_size, len(scenes))

    logger.info('Training %s pipeline (%d parameters) for %d steps on %d scenes',
                cfg.pipeline.mode, pipeline.num_parameters(), train_cfg.steps, len(scenes))
    for step in range(train_cfg.steps):
        optimizer.zero_grad()
        indices = [(step * batch + i) % len(scenes) for i in range(batch)]
        try:
            with Tape():
                terms = [pipeline_loss(pipeline(scenes[i]), targets[i], cfg) for i in indices]
                total = basic_ops.scale(_sum([t.total for t in terms]), 1.0 / batch)
                mask = basic_ops.scale(_sum([t.mask for t in terms]), 1.0 / batch)
            loss = total.item()
            if not np.isfinite(loss):
                raise TrainingDivergedError(step, list(recent) + [loss], [])
            backward(total)
        except NonFiniteError as error:
            logger.error('Non-finite value at step %d: %s', step, error)
            raise TrainingDivergedError(step, list(recent), _non_finite_grads(pipeline)) from error
        bad = _non_finite_grads(pipeline)
        if bad:
            raise TrainingDivergedError(step, list(recent) + [loss], bad)
        optimizer.step()
        recent.append(loss)
        result.loss_curve.append(loss)
        result.mask_loss_curve.append(mask.item())
        if train_cfg.log_every and (step % train_cfg.log_every == 0 or step == train_cfg.steps - 1):
            logger.info('step %d: loss %.5f (mask %.5f)', step, loss, result.mask_loss_curve[-1])

    if checkpoint_dir is not None:
        result.checkpoint = save_checkpoint(checkpoint_dir, pipeline, cfg)
    return result


def _sum(tensors: List[Tensor]) -> Tensor:
    total = tensors[0]
    for tensor in tensors[1:]:
        total = basic_ops.add(total, tensor)
    return total


def save_checkpoint(directory: Union[str, Path], pipeline: Pipeline, cfg: RunConfig) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    snapshot.save_state(directory / WEIGHTS_FILE, pipeline.state_dict())
    (directory / CONFIG_FILE).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
    logger.debug('Saved checkpoint to "%s"', directory)
    return directory


def load_checkpoint(directory: Union[str, Path]) -> Pipeline:
    """
    Rebuilds the pipeline from the checkpoint's config and loads its weights.
    """
    directory = Path(directory)
    config_path = directory / CONFIG_FILE
    if not config_path.is_file():
        raise PipelineError('Checkpoint "{}" has no {}'.format(directory, CONFIG_FILE))
    cfg = checkpoint_config(directory)
    pipeline = build_pipeline(cfg.pipeline, cfg.generator.image_channels, cfg.seed)
    pipeline.load_state_dict(snapshot.load_state(directory / WEIGHTS_FILE))
    return pipeline


def checkpoint_config(directory: Union[str, Path]) -> RunConfig:
    return build_config(json.loads((Path(directory) / CONFIG_FILE).read_text()))


def with_seed(cfg: RunConfig, seed: int) -> RunConfig:
    return replace(cfg, seed=int(seed))


def loss_summary(result: TrainingResult) -> Dict[str, float]:
    curve = result.mask_loss_curve
    if not curve:
        return {'initial_mask_loss': float('nan'), 'final_mask_loss': float('nan'), 'ratio': float('nan')}
    return {
        'initial_mask_loss': curve[0],
        'final_mask_loss': curve[-1],
        'ratio': curve[-1] / curve[0] if curve[0] else float('nan'),
    }
