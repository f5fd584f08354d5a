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
Metrics of a trained pipeline: foreground mask IoU and center localization error.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..config import EvaluationConfig
from ..geometry import BEVGeometry
from ..svdb import mask_ground_truth
from .degradation import Degradation
from .pipeline import Pipeline
from .scenes import Scene
from .training import load_checkpoint


logger = logging.getLogger(__name__)


@dataclass
class Metrics:
    mask_iou: float
    center_mae_m: float
    loss_curve: List[float] = field(default_factory=list)

    def to_dict(self):
        return {'mask_iou': self.mask_iou, 'center_mae_m': self.center_mae_m, 'loss_curve': list(self.loss_curve)}


@dataclass
class Prediction:
    mask_prob: np.ndarray
    center_prob: np.ndarray


def local_peaks(heatmap: np.ndarray, threshold: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    (rows, cols) of cells that are the maximum of their 3x3 window and exceed `threshold`.
    """
    padded = np.pad(heatmap, 1, constant_values=-np.inf)
    window_max = sliding_window_view(padded, (3, 3)).max(axis=(-2, -1))
    return np.nonzero((heatmap >= window_max) & (heatmap > threshold))


def decode_centers(heatmap: np.ndarray, grid: BEVGeometry, threshold: float, nms_radius_m: float) -> np.ndarray:
    """
    Decodes box centers from a (Y, X) center heatmap.

    Peaks are visited by descending score; a peak within `nms_radius_m` of an accepted one
    is dropped. Each accepted peak is refined to the score-weighted centroid of its 3x3
    window.

    Returns:
        (K, 2) centers in meters
    """
    rows, cols = local_peaks(heatmap, threshold)
    order = np.argsort(-heatmap[rows, cols], kind='stable')
    xs, ys = grid.cell_centers()
    centers = []
    for index in order:
        r, c = rows[index], cols[index]
        window = (slice(max(r - 1, 0), r + 2), slice(max(c - 1, 0), c + 2))
        weights = np.clip(heatmap[window], 0.0, None)
        center = np.array([(weights * xs[window]).sum(), (weights * ys[window]).sum()]) / weights.sum()
        if all(np.hypot(*(center - kept)) > nms_radius_m for kept in centers):
            centers.append(center)
    return np.array(centers).reshape(-1, 2)


def match_centers(predicted: np.ndarray, truth: np.ndarray, radius_m: float) -> List[float]:
    """
    Greedy matching by increasing distance, pairs farther than `radius_m` never match.

    Returns:
        one error per ground-truth center: its matched distance, or `radius_m` when unmatched
    """
    predicted = np.asarray(predicted, dtype=np.float64).reshape(-1, 2)
    truth = np.asarray(truth, dtype=np.float64).reshape(-1, 2)
    errors = np.full(len(truth), float(radius_m))
    if len(predicted) and len(truth):
        distances = np.linalg.norm(truth[:, None] - predicted[None], axis=-1)
        used_truth, used_pred = set(), set()
        for flat in np.argsort(distances, axis=None, kind='stable'):
            t, p = np.unravel_index(flat, distances.shape)
            if distances[t, p] > radius_m:
                break
            if t in used_truth or p in used_pred:
                continue
            used_truth.add(t)
            used_pred.add(p)
            errors[t] = distances[t, p]
    return errors.tolist()


def mask_iou(predicted: Sequence[np.ndarray], truth: Sequence[np.ndarray]) -> float:
    """
    Micro-averaged IoU over scenes; 1.0 when every union is empty.
    """
    intersection = sum(int(np.logical_and(p, t).sum()) for p, t in zip(predicted, truth))
    union = sum(int(np.logical_or(p, t).sum()) for p, t in zip(predicted, truth))
    return 1.0 if union == 0 else intersection / union


def center_mae_m(predicted: Sequence[np.ndarray], truth: Sequence[np.ndarray], radius_m: float) -> float:
    errors = [error for p, t in zip(predicted, truth) for error in match_centers(p, t, radius_m)]
    return float(np.mean(errors)) if errors else 0.0


def score_predictions(predictions: Sequence[Prediction], scenes: Sequence[Scene], grid: BEVGeometry,
                      cfg: EvaluationConfig, tau: float) -> Metrics:
    """
    Scores (mask, center heatmap) predictions against the scenes' boxes.
    """
    masks = [prediction.mask_prob > tau for prediction in predictions]
    truth_masks = [mask_ground_truth(scene.bev_boxes(), grid) > 0.5 for scene in scenes]
    centers = [decode_centers(prediction.center_prob, grid, cfg.peak_threshold, cfg.nms_radius_m)
               for prediction in predictions]
    return Metrics(mask_iou(masks, truth_masks),
                   center_mae_m(centers, [scene.centers() for scene in scenes], cfg.match_radius_m))


def predict(pipeline: Pipeline, scene: Scene, degradation: Optional[Degradation] = None) -> Prediction:
    output = pipeline(scene, degradation)
    return Prediction(output.mask_prob.data.copy(), output.center_prob.data.copy())


def predict_all(pipeline: Pipeline, scenes: Sequence[Scene], degradation: Optional[Degradation] = None,
                threads: int = 1) -> List[Prediction]:
    if threads <= 1:
        return [predict(pipeline, scene, degradation) for scene in scenes]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(lambda scene: predict(pipeline, scene, degradation), scenes))


def evaluate(pipeline: Pipeline, scenes: Sequence[Scene], cfg: EvaluationConfig,
             degradation: Optional[Degradation] = None, threads: int = 1) -> Metrics:
    """
    Runs the pipeline on every scene (optionally degraded) and scores the predictions.
    Results do not depend on `threads`.
    """
    predictions = predict_all(pipeline, scenes, degradation, threads)
    metrics = score_predictions(predictions, scenes, pipeline.grid, cfg, pipeline.cfg.tau)
    logger.debug('Evaluated %d scenes%s: iou %.4f, center mae %.4f m', len(scenes),
                 ' under {}'.format(degradation) if degradation else '', metrics.mask_iou, metrics.center_mae_m)
    return metrics


def evaluate_checkpoint(checkpoint: Union[str, Path], scenes: Sequence[Scene], cfg: EvaluationConfig,
                        threads: int = 1) -> Metrics:
    return evaluate(load_checkpoint(checkpoint), scenes, cfg, threads=threads)
