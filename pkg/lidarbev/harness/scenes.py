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
Synthetic driving scenes: oriented boxes on a ground plane, a ray-cast spinning LiDAR and
toy camera feature maps rasterized from the same boxes.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from PIL import Image, ImageDraw

from ..config import GeneratorConfig
from ..errors import PipelineError
from ..view_transform import CameraModel


logger = logging.getLogger(__name__)

BOX_FIELDS = ('cx', 'cy', 'cz', 'w', 'l', 'h', 'yaw', 'class')
BOX_INTENSITY = 0.8
GROUND_INTENSITY = 0.2
INTENSITY_JITTER = 0.05
PLACEMENT_ATTEMPTS = 200
BOX_GAP_M = 0.3
NEAR_PLANE_M = 0.1


@dataclass
class CameraView:
    camera: CameraModel
    image_feat: np.ndarray

    def to_dict(self) -> Dict:
        return {'camera': self.camera.to_dict(), 'image_feat': self.image_feat.tolist()}

    @classmethod
    def from_dict(cls, data: Dict) -> 'CameraView':
        return cls(CameraModel.from_dict(data['camera']), np.array(data['image_feat'], dtype=np.float64))


@dataclass
class Scene:
    """
    Ground truth for one synthetic frame.

    points: (N, 4) x, y, z, intensity; boxes: (K, 8) cx, cy, cz, w, l, h, yaw, class with
    l along the heading; the first camera's features live in `image_feat`, further cameras
    in `extra_views`.
    """

    points: np.ndarray
    boxes: np.ndarray
    camera: CameraModel
    image_feat: np.ndarray
    seed: int
    extra_views: List[CameraView] = field(default_factory=list)

    @property
    def views(self) -> List[CameraView]:
        return [CameraView(self.camera, self.image_feat)] + list(self.extra_views)

    def bev_boxes(self) -> np.ndarray:
        """
        (K, 5) rows of cx, cy, w, l, yaw.
        """
        return self.boxes[:, [0, 1, 3, 4, 6]] if len(self.boxes) else np.zeros((0, 5))

    def centers(self) -> np.ndarray:
        return self.boxes[:, :2] if len(self.boxes) else np.zeros((0, 2))

    def to_dict(self) -> Dict:
        return {
            'seed': int(self.seed),
            'points': self.points.tolist(),
            'boxes': self.boxes.tolist(),
            'camera': self.camera.to_dict(),
            'image_feat': self.image_feat.tolist(),
            'extra_views': [view.to_dict() for view in self.extra_views],
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'Scene':
        try:
            return cls(
                points=np.array(data['points'], dtype=np.float64).reshape(-1, 4),
                boxes=np.array(data['boxes'], dtype=np.float64).reshape(-1, len(BOX_FIELDS)),
                camera=CameraModel.from_dict(data['camera']),
                image_feat=np.array(data['image_feat'], dtype=np.float64),
                seed=int(data['seed']),
                extra_views=[CameraView.from_dict(view) for view in data.get('extra_views', [])],
            )
        except (KeyError, ValueError, TypeError) as error:
            raise PipelineError('Malformed scene data: {}'.format(error))


def save_scene(path: Union[str, Path], scene: Scene) -> Path:
    path = Path(path)
    path.write_text(json.dumps(scene.to_dict()))
    return path


def load_scene(path: Union[str, Path]) -> Scene:
    path = Path(path)
    try:
        return Scene.from_dict(json.loads(path.read_text()))
    except json.JSONDecodeError as error:
        raise PipelineError('Scene file "{}" is not valid JSON: {}'.format(path, error))


def scene_filename(seed: int) -> str:
    return 'scene_{:06d}.json'.format(seed)


def box_corners_bev(box: np.ndarray) -> np.ndarray:
    """
    (4, 2) footprint corners of a box row, counter-clockwise.
    """
    cx, cy, _, width, length, _, yaw = box[:7]
    local = np.array([[1, 1], [-1, 1], [-1, -1], [1, -1]]) * [length / 2, width / 2]
    rotation = np.array([[np.cos(yaw), -np.sin(yaw)], [np.sin(yaw), np.cos(yaw)]])
    return local @ rotation.T + [cx, cy]


def box_corners(box: np.ndarray) -> np.ndarray:
    """
    (8, 3) corners of a box row.
    """
    footprint = box_corners_bev(box)
    bottom = box[2] - box[5] / 2
    top = box[2] + box[5] / 2
    return np.vstack([np.column_stack([footprint, np.full(4, bottom)]),
                      np.column_stack([footprint, np.full(4, top)])])


def footprints_overlap(first: np.ndarray, second: np.ndarray, gap: float = 0.0) -> bool:
    """
    Separating-axis test for two convex (4, 2) footprints, treating them as overlapping
    when closer than `gap` along every candidate axis.
    """
    for polygon in (first, second):
        edges = np.roll(polygon, -1, axis=0) - polygon
        for nx, ny in np.column_stack([-edges[:, 1], edges[:, 0]]):
            axis = np.array([nx, ny]) / np.hypot(nx, ny)
            a, b = first @ axis, second @ axis
            if a.max() + gap < b.min() or b.max() + gap < a.min():
                return False
    return True


def sample_boxes(rng: np.random.Generator, gen: GeneratorConfig) -> np.ndarray:
    """
    Rejection-samples non-overlapping boxes in a sector ahead of the ego vehicle.
    """
    count = int(rng.integers(gen.min_boxes, gen.max_boxes + 1))
    boxes = []
    for _ in range(PLACEMENT_ATTEMPTS):
        if len(boxes) == count:
            break
        radius = rng.uniform(*gen.placement_radius_m)
        azimuth = np.radians(rng.uniform(*gen.box_azimuth_deg))
        width = rng.uniform(*gen.box_width_m)
        length = rng.uniform(*gen.box_length_m)
        height = rng.uniform(*gen.box_height_m)
        yaw = rng.uniform(-np.pi, np.pi)
        label = int(rng.integers(gen.num_classes))
        box = np.array([radius * np.cos(azimuth), radius * np.sin(azimuth), height / 2,
                        width, length, height, yaw, label])
        footprint = box_corners_bev(box)
        if np.linalg.norm(footprint, axis=1).min() < 1.0:
            continue
        if any(footprints_overlap(footprint, box_corners_bev(other), BOX_GAP_M) for other in boxes):
            continue
        boxes.append(box)
    if len(boxes) < count:
        logger.warning('Placed %d of %d boxes after %d attempts', len(boxes), count, PLACEMENT_ATTEMPTS)
    return np.array(boxes).reshape(-1, len(BOX_FIELDS))


def lidar_directions(gen: GeneratorConfig) -> np.ndarray:
    """
    (R, 3) unit directions: every azimuth step for every beam elevation.
    """
    azimuth = np.arange(gen.azimuth_rays) * (2 * np.pi / gen.azimuth_rays)
    elevation = np.radians(np.linspace(gen.elevation_deg[0], gen.elevation_deg[1], gen.beams))
    az, el = np.meshgrid(azimuth, elevation, indexing='ij')
    return np.stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=-1).reshape(-1, 3)


def ray_box_distance(origin: np.ndarray, directions: np.ndarray, box: np.ndarray) -> np.ndarray:
    """
    Entry distance of each ray into an oriented box, inf where it misses.
    """
    cx, cy, cz, width, length, height, yaw = box[:7]
    cos, sin = np.cos(yaw), np.sin(yaw)
    # world -> box frame: rotate by -yaw about z
    rotation = np.array([[cos, sin, 0.0], [-sin, cos, 0.0], [0.0, 0.0, 1.0]])
    local_origin = rotation @ (origin - [cx, cy, cz])
    local_dirs = directions @ rotation.T
    half = np.array([length / 2, width / 2, height / 2])
    with np.errstate(divide='ignore', invalid='ignore'):
        t1 = (-half - local_origin) / local_dirs
        t2 = (half - local_origin) / local_dirs
    t_near = np.nanmax(np.minimum(t1, t2), axis=1)
    t_far = np.nanmin(np.maximum(t1, t2), axis=1)
    hit = (t_near <= t_far) & (t_near > 0)
    return np.where(hit, t_near, np.inf)


def cast_lidar(rng: np.random.Generator, boxes: np.ndarray, gen: GeneratorConfig) -> np.ndarray:
    """
    Nearest-hit ray casting against the boxes and the z = 0 ground, with range-dependent
    dropout and range noise.

    Returns:
        (N, 4) x, y, z, intensity
    """
    origin = np.array([0.0, 0.0, gen.sensor_height_m])
    directions = lidar_directions(gen)
    with np.errstate(divide='ignore'):
        distance = np.where(directions[:, 2] < 0, -origin[2] / directions[:, 2], np.inf)
    on_box = np.zeros(len(directions), dtype=bool)
    for box in boxes:
        t_box = ray_box_distance(origin, directions, box)
        closer = t_box < distance
        distance = np.where(closer, t_box, distance)
        on_box |= closer
    hit = distance <= gen.max_range_m
    keep = hit & (rng.uniform(size=len(directions)) < np.exp(-gen.dropout_per_m * np.where(hit, distance, 0.0)))
    distance, directions, on_box = distance[keep], directions[keep], on_box[keep]
    if gen.range_noise_m > 0:
        distance = distance + rng.normal(scale=gen.range_noise_m, size=distance.shape)
    xyz = origin + distance[:, None] * directions
    intensity = np.where(on_box, BOX_INTENSITY, GROUND_INTENSITY) + rng.uniform(
        -INTENSITY_JITTER, INTENSITY_JITTER, size=distance.shape)
    logger.debug('Cast %d rays, kept %d points (%d on boxes)', len(keep), len(xyz), int(on_box.sum()))
    return np.column_stack([xyz, intensity])


def _convex_hull(points: np.ndarray) -> List[Tuple[float, float]]:
    ordered = sorted(map(tuple, points))
    if len(ordered) < 3:
        return ordered

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for point in ordered:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], point) <= 0:
            lower.pop()
        lower.append(point)
    for point in reversed(ordered):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], point) <= 0:
            upper.pop()
        upper.append(point)
    return lower[:-1] + upper[:-1]


def render_image_features(rng: np.random.Generator, boxes: np.ndarray, camera: CameraModel,
                          gen: GeneratorConfig) -> np.ndarray:
    """
    Rasterizes box silhouettes, far to near, into class one-hot channels plus an
    inverse-depth channel, then adds gaussian noise.

    Returns:
        (num_classes + 1, H, W) feature map
    """
    rows, cols = camera.image_size
    labels = Image.new('I', (cols, rows), 0)
    draw = ImageDraw.Draw(labels)
    inverse_depth = {}
    distances = [np.linalg.norm(box[:2] - camera.translation[:2]) for box in boxes]
    for index in np.argsort(distances)[::-1]:
        uv, depth = camera.project(box_corners(boxes[index]))
        if (depth <= NEAR_PLANE_M).any():
            continue
        hull = _convex_hull(uv)
        if len(hull) >= 3:
            draw.polygon(hull, fill=int(index) + 1)
            inverse_depth[int(index) + 1] = 1.0 / max(distances[index], NEAR_PLANE_M)

    label_map = np.array(labels, dtype=np.int64)
    features = np.zeros((gen.image_channels, rows, cols))
    for label, inv in inverse_depth.items():
        covered = label_map == label
        features[int(boxes[label - 1, 7]), covered] = 1.0
        features[-1, covered] = inv
    if gen.image_noise > 0:
        features += rng.normal(scale=gen.image_noise, size=features.shape)
    return features


def scene_cameras(gen: GeneratorConfig) -> List[CameraModel]:
    """
    Cameras yaw-spaced by 90 degrees, the first looking along the ego heading.
    """
    return [CameraModel.looking(i * np.pi / 2, gen.camera_height_m, gen.focal_px, gen.image_size)
            for i in range(gen.num_cameras)]


def generate_scene(seed: int, gen: GeneratorConfig) -> Scene:
    """
    Builds a scene deterministically from `seed`.
    """
    rng = np.random.default_rng(seed)
    boxes = sample_boxes(rng, gen)
    points = cast_lidar(rng, boxes, gen)
    views = [CameraView(camera, render_image_features(rng, boxes, camera, gen)) for camera in scene_cameras(gen)]
    return Scene(points, boxes, views[0].camera, views[0].image_feat, seed, views[1:])


def generate_scenes(seeds: List[int], gen: GeneratorConfig, threads: int = 1) -> List[Scene]:
    """
    Generates scenes for `seeds`, in order; `threads > 1` spreads them over a thread pool.
    """
    if threads <= 1:
        return [generate_scene(seed, gen) for seed in seeds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda seed: generate_scene(seed, gen), seeds))


def write_scenes(directory: Union[str, Path], scenes: List[Scene]) -> List[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    return [save_scene(directory / scene_filename(scene.seed), scene) for scene in scenes]


def read_scenes(directory: Union[str, Path], limit: Optional[int] = None) -> List[Scene]:
    paths = sorted(Path(directory).glob('scene_*.json'))
    if limit is not None:
        paths = paths[:limit]
    return [load_scene(path) for path in paths]
