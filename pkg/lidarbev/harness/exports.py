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
Figure data for inspecting the dilation blocks: deformable sampling locations of the
semantic-guided blocks and the occupancy added by sparse voxel dilation.

Every export is a CSV plus an SVG scatter; occupancy additionally gets a PNG preview with
dilated cells in green.
"""

import logging
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa E402
import numpy as np  # noqa E402
from PIL import Image  # noqa E402

from ..config import ExportConfig  # noqa E402
from ..errors import PipelineError  # noqa E402
from ..sbdb import export_sampling_locations  # noqa E402
from ..svdb import occupancy_rows  # noqa E402
from .experiments import write_csv  # noqa E402
from .pipeline import Pipeline  # noqa E402
from .scenes import Scene  # noqa E402


logger = logging.getLogger(__name__)

SAMPLING_COLUMNS = ('stage', 'block', 'group', 'k', 'x', 'y', 'modulation')
OCCUPANCY_COLUMNS = ('x', 'y', 'status')
OCCUPANCY_COLORS = {'original': (200, 200, 200), 'dilated': (0, 200, 0)}
SVG_SALT = 'lidarbev'

# deterministic SVG element ids
matplotlib.rcParams['svg.hashsalt'] = SVG_SALT


def default_query_cell(scene: Scene, pipeline: Pipeline, query_cell: Sequence[int] = ()) -> Tuple[int, int]:
    """
    The configured cell, else the cell nearest the first box center, else the grid center.
    """
    grid = pipeline.grid
    if len(query_cell) == 2:
        return int(query_cell[0]), int(query_cell[1])
    centers = scene.centers()
    if len(centers) == 0:
        return grid.width // 2, grid.height // 2
    ix, iy = grid.cell_of(np.array([centers[0][0]]), np.array([centers[0][1]]))
    return int(np.clip(ix[0], 0, grid.width - 1)), int(np.clip(iy[0], 0, grid.height - 1))


def _save_svg(fig, path: Path) -> Path:
    fig.savefig(path, format='svg', metadata={'Date': None})
    plt.close(fig)
    return path


def sampling_rows(pipeline: Pipeline, query_cell: Tuple[int, int], threshold: float) -> List[Dict]:
    rows = []
    for stage_index, stage in enumerate(pipeline.stages):
        cell = (query_cell[0] >> stage_index, query_cell[1] >> stage_index)
        for block_index, block in enumerate(stage.blocks):
            for location in export_sampling_locations(block, cell, threshold):
                rows.append(dict(location._asdict(), stage=stage_index, block=block_index))
    return rows


def plot_sampling(rows: Sequence[Dict], stage: int, query_cell: Tuple[int, int], extent: Tuple[int, int], path: Path):
    fig, ax = plt.subplots(figsize=(5, 5))
    stage_rows = [row for row in rows if row['stage'] == stage]
    if stage_rows:
        points = ax.scatter([row['x'] for row in stage_rows], [row['y'] for row in stage_rows],
                            c=[row['modulation'] for row in stage_rows], cmap='viridis', vmin=0.0, vmax=1.0, s=16)
        fig.colorbar(points, ax=ax).set_label('modulation')
    ax.scatter([query_cell[0]], [query_cell[1]], marker='x', color='red', s=40)
    ax.set_xlim(-0.5, extent[0] - 0.5)
    ax.set_ylim(-0.5, extent[1] - 0.5)
    ax.set_aspect('equal')
    ax.set_xlabel('x (cells)')
    ax.set_ylabel('y (cells)')
    ax.set_title('stage {} sampling locations'.format(stage))
    return _save_svg(fig, path)


def export_sampling(pipeline: Pipeline, scene: Scene, cfg: ExportConfig, out_dir: Union[str, Path]) -> List[Path]:
    """
    Runs `scene` forward and writes the sampling locations of every semantic-guided block
    for the query cell (at each stage's resolution) to `sampling.csv` and
    `sampling_stage<k>.svg`.
    """
    if not pipeline.cfg.use_sbdb:
        raise PipelineError('Sampling locations need a pipeline with semantic-guided dilation blocks')
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pipeline(scene)
    query = default_query_cell(scene, pipeline, cfg.query_cell)
    rows = sampling_rows(pipeline, query, cfg.modulation_threshold)
    logger.info('Exporting %d sampling locations for query cell %s', len(rows), query)
    paths = [write_csv(out_dir / 'sampling.csv', SAMPLING_COLUMNS, rows)]
    for stage_index, stage in enumerate(pipeline.stages):
        cell = (query[0] >> stage_index, query[1] >> stage_index)
        extent = (pipeline.grid.width >> stage_index, pipeline.grid.height >> stage_index)
        paths.append(plot_sampling(rows, stage_index, cell, extent,
                                   out_dir / 'sampling_stage{}.svg'.format(stage_index)))
    return paths


def occupancy_image(rows: Sequence[Tuple[int, int, str]], extent: Tuple[int, int], scale: int = 4) -> Image.Image:
    """
    RGB preview, north up: original cells grey, dilated cells green, empty cells black.
    """
    width, height = extent
    pixels = np.zeros((height, width, 3), dtype=np.uint8)
    for x, y, status in rows:
        pixels[height - 1 - y, x] = OCCUPANCY_COLORS[status]
    image = Image.fromarray(pixels)
    return image.resize((width * scale, height * scale), Image.NEAREST)


def plot_occupancy(rows: Sequence[Tuple[int, int, str]], extent: Tuple[int, int], path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 5))
    for status, color in (('original', 'grey'), ('dilated', 'green')):
        cells = [(x, y) for x, y, s in rows if s == status]
        if cells:
            xs, ys = zip(*cells)
            ax.scatter(xs, ys, marker='s', s=6, color=color, label=status)
    ax.set_xlim(-0.5, extent[0] - 0.5)
    ax.set_ylim(-0.5, extent[1] - 0.5)
    ax.set_aspect('equal')
    ax.set_xlabel('x (cells)')
    ax.set_ylabel('y (cells)')
    if rows:
        ax.legend(loc='upper right')
    return _save_svg(fig, path)


def export_occupancy(pipeline: Pipeline, scene: Scene, cfg: ExportConfig, out_dir: Union[str, Path]) -> List[Path]:
    """
    Writes original versus dilated BEV occupancy of `scene` to `occupancy.csv`,
    `occupancy.svg` and `occupancy.png`.
    """
    if not pipeline.cfg.use_svdb:
        raise PipelineError('Occupancy export needs a pipeline with a sparse voxel dilation block')
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    output = pipeline(scene)
    rows = occupancy_rows(output.lidar_voxels, output.dilation)
    dilated = sum(1 for _, _, status in rows if status == 'dilated')
    logger.info('Exporting occupancy: %d original, %d dilated cells', len(rows) - dilated, dilated)
    extent = (pipeline.grid.width, pipeline.grid.height)
    csv_path = write_csv(out_dir / 'occupancy.csv', OCCUPANCY_COLUMNS,
                         [{'x': x, 'y': y, 'status': status} for x, y, status in rows])
    svg_path = plot_occupancy(rows, extent, out_dir / 'occupancy.svg')
    png_path = out_dir / 'occupancy.png'
    occupancy_image(rows, extent, cfg.png_scale).save(png_path)
    return [csv_path, svg_path, png_path]
