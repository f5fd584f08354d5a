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
Run configuration: TOML files merged over `lidarbev.metadata.DEFAULTS`.

Precedence, highest first: command-line flags, the RUN_SEED environment variable (seed
only), the config file, the defaults.
"""

import json
import logging
import os
import sys
from copy import deepcopy
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

from .errors import ConfigError
from .metadata import ABLATION_VARIANTS, DEFAULTS, DEGRADATION_KINDS, PIPELINE_MODES

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


logger = logging.getLogger(__name__)

SEED_ENV = 'RUN_SEED'


@dataclass(frozen=True)
class PipelineConfig:
    mode: str
    use_svdb: bool
    use_sbdb: bool
    stages: int
    blocks_per_stage: int
    tau: float
    groups: int
    kernel_size: int
    grid_size: Tuple[int, int]
    cell_size_m: float
    range_m: Tuple[Tuple[float, float], ...]
    voxel_height_m: float
    point_hidden: int
    lidar_channels: int
    image_channels: int
    depth_bins: int
    depth_min_m: float
    depth_max_m: float
    depth_hidden: int
    scan_state_dim: int
    scan_expand: int
    scan_conv: bool
    scan_conv_width: int
    ffn_ratio: int
    head_hidden: int
    svdb_mask_source: str
    svdb_fill: str
    sbdb_guidance: str

    def validate(self, requested: Optional[Mapping[str, Any]] = None) -> 'PipelineConfig':
        """
        Checks value ranges and module combinations.

        Args:
            requested: keys explicitly set by the user; `naive_concat` together with an explicit
                `use_svdb`/`use_sbdb = true` is rejected rather than silently overridden

        Returns:
            the config, with SVDB and SBDB forced off in `naive_concat` mode
        """
        requested = requested or {}
        if self.mode not in PIPELINE_MODES:
            raise ConfigError('pipeline.mode must be one of {}, got "{}"'.format(PIPELINE_MODES, self.mode))
        config = self
        if self.mode == 'naive_concat':
            for key in ('use_svdb', 'use_sbdb'):
                if requested.get(key) is True:
                    raise ConfigError(
                        'pipeline.{} = true is invalid with mode "naive_concat": the naive baseline '
                        'replaces SVDB and SBDB with plain conv stages on concatenated features'.format(key)
                    )
            config = replace(self, use_svdb=False, use_sbdb=False)
        checks = [
            (config.stages >= 1, 'pipeline.stages must be >= 1'),
            (config.blocks_per_stage >= 1, 'pipeline.blocks_per_stage must be >= 1'),
            (0.0 < config.tau < 1.0, 'pipeline.tau must lie in (0, 1)'),
            (config.groups >= 1, 'pipeline.groups must be >= 1'),
            (config.lidar_channels % config.groups == 0, 'pipeline.lidar_channels must be divisible by groups'),
            (config.kernel_size % 2 == 1, 'pipeline.kernel_size must be odd'),
            (all(extent > 0 for extent in config.grid_size), 'pipeline.grid_size extents must be positive'),
            (config.cell_size_m > 0 and config.voxel_height_m > 0, 'cell and voxel sizes must be positive'),
            (config.depth_min_m > 0 and config.depth_max_m > config.depth_min_m,
             'pipeline.depth_min_m must be positive and below depth_max_m'),
            (config.depth_bins >= 1, 'pipeline.depth_bins must be >= 1'),
            (config.svdb_mask_source in ('multimodal', 'lidar'), 'pipeline.svdb_mask_source: multimodal | lidar'),
            (config.svdb_fill in ('learnable', 'zero'), 'pipeline.svdb_fill: learnable | zero'),
            (config.sbdb_guidance in ('multimodal', 'lidar', 'fusion'),
             'pipeline.sbdb_guidance: multimodal | lidar | fusion'),
        ]
        for passed, message in checks:
            if not passed:
                raise ConfigError(message)
        if config.sbdb_guidance == 'fusion' and (config.lidar_channels + config.image_channels) % config.groups:
            raise ConfigError('fusion guidance needs lidar_channels + image_channels divisible by groups')
        scale = 2 ** (config.stages - 1)
        if any(extent % scale for extent in config.grid_size):
            raise ConfigError('grid_size {} is not divisible by 2^(stages-1) = {}'.format(config.grid_size, scale))
        (xmin, xmax), (ymin, ymax), _ = config.range_m
        for extent, (low, high) in zip(config.grid_size, ((xmin, xmax), (ymin, ymax))):
            if abs((high - low) / config.cell_size_m - extent) > 1e-9:
                raise ConfigError('range_m {} and cell_size_m {} do not give grid_size {}'
                                  .format(config.range_m, config.cell_size_m, config.grid_size))
        return config


@dataclass(frozen=True)
class GeneratorConfig:
    min_boxes: int
    max_boxes: int
    placement_radius_m: Tuple[float, float]
    box_azimuth_deg: Tuple[float, float]
    box_width_m: Tuple[float, float]
    box_length_m: Tuple[float, float]
    box_height_m: Tuple[float, float]
    num_classes: int
    sensor_height_m: float
    azimuth_rays: int
    elevation_deg: Tuple[float, float]
    beams: int
    max_range_m: float
    dropout_per_m: float
    range_noise_m: float
    num_cameras: int
    camera_height_m: float
    image_size: Tuple[int, int]
    focal_px: float
    image_noise: float

    def validate(self) -> 'GeneratorConfig':
        if not 0 <= self.min_boxes <= self.max_boxes:
            raise ConfigError('generator.min_boxes must be in [0, max_boxes]')
        if not 1 <= self.num_cameras <= 4:
            raise ConfigError('generator.num_cameras must be between 1 and 4')
        if self.beams < 1 or self.azimuth_rays < 1:
            raise ConfigError('generator.beams and azimuth_rays must be positive')
        return self

    @property
    def image_channels(self) -> int:
        """
        Toy image features: one channel per class plus an inverse-depth channel.
        """
        return self.num_classes + 1


@dataclass(frozen=True)
class TrainingConfig:
    steps: int
    num_scenes: int
    batch_size: int
    lr: float
    weight_decay: float
    betas: Tuple[float, float]
    focal_alpha: float
    focal_gamma: float
    center_loss_weight: float
    svdb_loss_weight: float
    center_radius_m: float
    log_every: int

    def validate(self) -> 'TrainingConfig':
        if self.steps < 0 or self.num_scenes < 1 or self.batch_size < 1:
            raise ConfigError('training.steps must be >= 0, num_scenes and batch_size >= 1')
        if self.lr < 0:
            raise ConfigError('training.lr must be non-negative')
        return self


@dataclass(frozen=True)
class EvaluationConfig:
    num_scenes: int
    scene_seed_offset: int
    match_radius_m: float
    peak_threshold: float
    nms_radius_m: float


@dataclass(frozen=True)
class RobustnessConfig:
    degradations: Tuple[str, ...]
    magnitudes: Dict[str, List[float]]
    default_magnitudes: Dict[str, float]
    replicates: int

    def validate(self) -> 'RobustnessConfig':
        unknown = [kind for kind in self.degradations if kind not in DEGRADATION_KINDS]
        if unknown:
            raise ConfigError('robustness.degradations has unknown kinds {}'.format(unknown))
        return self


@dataclass(frozen=True)
class AblationConfig:
    variants: Tuple[str, ...]
    replicates: int

    def validate(self) -> 'AblationConfig':
        unknown = [name for name in self.variants if name not in ABLATION_VARIANTS]
        if unknown:
            raise ConfigError('ablation.variants has unknown names {}; known: {}'
                              .format(unknown, sorted(ABLATION_VARIANTS)))
        return self


@dataclass(frozen=True)
class ExportConfig:
    modulation_threshold: float
    query_cell: Tuple[int, ...]
    png_scale: int
    scene_seed: int


@dataclass(frozen=True)
class RunConfig:
    seed: int
    threads: int
    output_dir: str
    checked: bool
    pipeline: PipelineConfig
    generator: GeneratorConfig
    training: TrainingConfig
    evaluation: EvaluationConfig
    robustness: RobustnessConfig
    ablation: AblationConfig
    export: ExportConfig
    requested: Dict[str, Any] = field(default_factory=dict, compare=False, repr=False)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data.pop('requested')
        return _jsonable(data)

    def write_resolved(self, directory: Union[str, Path]) -> Path:
        """
        Writes `config.resolved.json` into a run directory.
        """
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / 'config.resolved.json'
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
        return path

    def with_pipeline(self, **overrides) -> 'RunConfig':
        """
        Returns a copy with pipeline keys replaced and revalidated.
        """
        pipeline = replace(self.pipeline, **overrides).validate(overrides)
        return replace(self, pipeline=pipeline)


SECTION_TYPES = {
    'pipeline': PipelineConfig,
    'generator': GeneratorConfig,
    'training': TrainingConfig,
    'evaluation': EvaluationConfig,
    'robustness': RobustnessConfig,
    'ablation': AblationConfig,
    'export': ExportConfig,
}


def _jsonable(value):
    if isinstance(value, dict):
        return {key: _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    return value


def _freeze(value):
    if isinstance(value, list):
        return tuple(_freeze(item) for item in value)
    return value


def merge_over_defaults(overrides: Mapping[str, Any], defaults: Mapping[str, Any] = DEFAULTS,
                        prefix: str = '') -> Dict[str, Any]:
    """
    Returns a deep copy of `defaults` updated with `overrides`.

    Raises:
        ConfigError: naming the dotted path of the first unknown key
    """
    merged = deepcopy(dict(defaults))
    for key, value in overrides.items():
        path = prefix + key
        if key not in defaults:
            raise ConfigError('Unknown config key "{}"'.format(path))
        if isinstance(defaults[key], dict):
            if not isinstance(value, Mapping):
                raise ConfigError('Config key "{}" must be a table'.format(path))
            merged[key] = merge_over_defaults(value, defaults[key], prefix=path + '.')
        else:
            merged[key] = deepcopy(value)
    return merged


def _section(section: str, values: Dict[str, Any]):
    cls = SECTION_TYPES[section]
    names = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in values.items():
        if key not in names:
            raise ConfigError('Unknown config key "{}.{}"'.format(section, key))
        kwargs[key] = value if isinstance(value, dict) else _freeze(value)
    return cls(**kwargs)


def build_config(overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    Builds and validates a RunConfig from nested overrides of the defaults.
    """
    overrides = dict(overrides or {})
    merged = merge_over_defaults(overrides)
    sections = {name: _section(name, merged[name]) for name in SECTION_TYPES}
    requested_pipeline = dict(overrides.get('pipeline', {}))
    sections['pipeline'] = sections['pipeline'].validate(requested_pipeline)
    sections['generator'] = sections['generator'].validate()
    sections['training'] = sections['training'].validate()
    sections['robustness'] = sections['robustness'].validate()
    sections['ablation'] = sections['ablation'].validate()
    if merged['threads'] < 1:
        raise ConfigError('threads must be >= 1')
    return RunConfig(
        seed=int(merged['seed']),
        threads=int(merged['threads']),
        output_dir=str(merged['output_dir']),
        checked=bool(merged['checked']),
        requested=overrides,
        **sections,
    )


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    try:
        with open(path, 'rb') as f:
            return tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError('Config file "{}" does not exist'.format(path))
    except tomllib.TOMLDecodeError as error:
        raise ConfigError('Config file "{}" is not valid TOML: {}'.format(path, error))


def load_config(
    path: Optional[Union[str, Path]] = None,
    flags: Optional[Mapping[str, Any]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    """
    Resolves a run config from defaults, an optional TOML file, RUN_SEED and flag values.

    Args:
        path: TOML file, optional
        flags: top-level keys set on the command line (None values are ignored)
        environ: environment mapping, os.environ when omitted

    Returns:
        validated RunConfig
    """
    environ = os.environ if environ is None else environ
    overrides = read_config_file(path) if path is not None else {}
    if environ.get(SEED_ENV):
        try:
            overrides['seed'] = int(environ[SEED_ENV])
        except ValueError:
            raise ConfigError('{} must be an integer, got "{}"'.format(SEED_ENV, environ[SEED_ENV]))
        logger.info('Seed %s taken from %s', overrides['seed'], SEED_ENV)
    for key, value in (flags or {}).items():
        if value is not None:
            overrides[key] = value
    return build_config(overrides)
