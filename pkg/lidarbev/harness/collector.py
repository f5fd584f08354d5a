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
Collects the scenes an experiment runs on, from a scene directory or by generation.
"""

import logging
from pathlib import Path
from typing import List, Optional, Sequence, Union

from ..config import GeneratorConfig
from .scenes import Scene, generate_scene, generate_scenes, load_scene, scene_filename


logger = logging.getLogger(__name__)


class SceneCollector:
    """
    Resolves `seeds` to scenes. When `scene_dir` is given, scenes are read from
    `scene_<seed>.json` files there; missing files are generated instead, with a warning.
    """

    def __init__(self, seeds: Sequence[int], gen: GeneratorConfig, scene_dir: Optional[Union[str, Path]] = None,
                 threads: int = 1):
        self.seeds = [int(seed) for seed in seeds]
        self.gen = gen
        self.scene_dir = Path(scene_dir) if scene_dir is not None else None
        self.threads = threads
        self.scenes = []  # type: List[Scene]

    def collect(self) -> List[Scene]:
        self.scenes = self.get_scenes()
        return self.scenes

    def get_scenes(self) -> List[Scene]:
        if self.scene_dir is None:
            return generate_scenes(self.seeds, self.gen, self.threads)
        scenes = []
        for seed in self.seeds:
            path = self.scene_dir / scene_filename(seed)
            if path.is_file():
                scenes.append(load_scene(path))
            else:
                logger.warning('Scene file "%s" not found; generating seed %d', path, seed)
                scenes.append(generate_scene(seed, self.gen))
        return scenes


def training_seeds(base_seed: int, count: int) -> List[int]:
    return [base_seed + i for i in range(count)]


def evaluation_seeds(base_seed: int, count: int, offset: int) -> List[int]:
    """
    Held-out seeds, disjoint from training seeds while `offset` exceeds the training count.
    """
    return [base_seed + offset + i for i in range(count)]
