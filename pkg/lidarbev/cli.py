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
Command-line entry point.

Every subcommand resolves a run config (flag > RUN_SEED > --config file > defaults), writes
`config.resolved.json` into the output directory and keeps all its outputs there.
Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error; failures print one
`error: {"code": ..., "message": ...}` line on stderr.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from bevgrad.errors import SubstrateError
from bevgrad.tensor import set_checked

from .config import RunConfig, load_config
from .errors import ConfigError, PipelineError
from .harness import collector, experiments, exports, scenes
from .harness.evaluation import evaluate
from .harness.pipeline import build_pipeline
from .harness.training import load_checkpoint, loss_summary, train


logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


def parse_args(args: List[str]) -> argparse.Namespace:
    """
    Args:
        args: argument list to parse, such as sys.argv[1:]
    """
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=Path, help='TOML run config')
    common.add_argument('--out', dest='output_dir', help='Output directory (config key output_dir)')
    common.add_argument('--seed', type=int, help='Base seed (config key seed)')
    common.add_argument('--threads', type=int, help='Worker threads; 1 guarantees reproducibility')
    common.add_argument('-v', '--verbose', action='store_true', help='Debug logging')

    parser = argparse.ArgumentParser(prog='lidarbev', description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    commands = parser.add_subparsers(dest='command', required=True)

    gen = commands.add_parser('gen-scenes', parents=[common], help='Generate toy scenes as JSON')
    gen.add_argument('--count', type=int, help='Number of scenes (default: training.num_scenes)')

    train_cmd = commands.add_parser('train', parents=[common], help='Train a pipeline')
    train_cmd.add_argument('--scenes', type=Path, help='Scene directory; missing seeds are generated')

    eval_cmd = commands.add_parser('eval', parents=[common], help='Evaluate a checkpoint on held-out scenes')
    eval_cmd.add_argument('--checkpoint', type=Path, required=True)
    eval_cmd.add_argument('--scenes', type=Path)

    for name, text in (('robustness', 'Degradation sweep of LiDAR-centric versus naive concat'),
                       ('ablation', 'Train and evaluate the configured pipeline variants')):
        experiment = commands.add_parser(name, parents=[common], help=text)
        experiment.add_argument('--scenes', type=Path)

    for name, text in (('viz-sampling', 'Export deformable sampling locations'),
                       ('viz-occupancy', 'Export original versus dilated occupancy')):
        viz = commands.add_parser(name, parents=[common], help=text)
        viz.add_argument('--checkpoint', type=Path, help='Trained weights; freshly initialized when omitted')

    selftest = commands.add_parser('selftest', parents=[common], help='Run the oracle and gradient checks')
    selftest.add_argument('--experiments', action='store_true',
                          help='Also run the training, ablation and robustness checks')
    return parser.parse_args(args)


def resolve_config(args: argparse.Namespace) -> RunConfig:
    flags = {'seed': args.seed, 'threads': args.threads, 'output_dir': args.output_dir}
    return load_config(args.config, flags)


def _write_json(path: Path, data) -> Path:
    path.write_text(json.dumps(data, indent=2, sort_keys=True))
    return path


def _pipeline_for_export(args: argparse.Namespace, cfg: RunConfig):
    if args.checkpoint is not None:
        return load_checkpoint(args.checkpoint)
    return build_pipeline(cfg.pipeline, cfg.generator.image_channels, cfg.seed)


def run_command(args: argparse.Namespace, cfg: RunConfig) -> int:
    out_dir = Path(cfg.output_dir)
    cfg.write_resolved(out_dir)

    if args.command == 'gen-scenes':
        count = args.count if args.count is not None else cfg.training.num_scenes
        generated = scenes.generate_scenes(collector.training_seeds(cfg.seed, count), cfg.generator, cfg.threads)
        paths = scenes.write_scenes(out_dir / 'scenes', generated)
        logger.info('Wrote %d scenes to "%s"', len(paths), out_dir / 'scenes')

    elif args.command == 'train':
        seeds = collector.training_seeds(cfg.seed, cfg.training.num_scenes)
        train_scenes = collector.SceneCollector(seeds, cfg.generator, args.scenes, cfg.threads).collect()
        result = train(cfg, train_scenes, out_dir / 'checkpoint')
        _write_json(out_dir / 'training.json', dict(loss_summary(result), loss_curve=result.loss_curve,
                                                     mask_loss_curve=result.mask_loss_curve))

    elif args.command == 'eval':
        pipeline = load_checkpoint(args.checkpoint)
        seeds = collector.evaluation_seeds(cfg.seed, cfg.evaluation.num_scenes, cfg.evaluation.scene_seed_offset)
        eval_scenes = collector.SceneCollector(seeds, cfg.generator, args.scenes, cfg.threads).collect()
        metrics = evaluate(pipeline, eval_scenes, cfg.evaluation, threads=cfg.threads)
        _write_json(out_dir / 'metrics.json', metrics.to_dict())
        logger.info('mask_iou %.4f, center_mae_m %.4f', metrics.mask_iou, metrics.center_mae_m)

    elif args.command == 'robustness':
        experiments.robustness_experiment(cfg, scene_dir=args.scenes, out_dir=out_dir)

    elif args.command == 'ablation':
        experiments.ablation_experiment(cfg, scene_dir=args.scenes, out_dir=out_dir)

    elif args.command in ('viz-sampling', 'viz-occupancy'):
        pipeline = _pipeline_for_export(args, cfg)
        scene = scenes.generate_scene(cfg.export.scene_seed, cfg.generator)
        export = exports.export_sampling if args.command == 'viz-sampling' else exports.export_occupancy
        export(pipeline, scene, cfg.export, out_dir)

    elif args.command == 'selftest':
        from bevcheck.suite import run_selftest
        result = run_selftest(cfg, out_dir, experiments=args.experiments)
        return EXIT_OK if result.passed else EXIT_FAILURE

    return EXIT_OK


def _report_error(error: Exception) -> None:
    line = json.dumps({'code': type(error).__name__, 'message': str(error)})
    print('error: {}'.format(line), file=sys.stderr)


def main(argv: Optional[List[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse_args(argv)
    except SystemExit as exit_:
        return exit_.code if isinstance(exit_.code, int) else EXIT_USAGE

    logging.basicConfig(format='%(levelname)s - %(name)s: %(message)s',
                        level=logging.DEBUG if args.verbose else logging.INFO)
    try:
        cfg = resolve_config(args)
        set_checked(cfg.checked)
        return run_command(args, cfg)
    except ConfigError as error:
        _report_error(error)
        return EXIT_USAGE
    except (PipelineError, SubstrateError, OSError) as error:
        logger.debug('Command failed', exc_info=True)
        _report_error(error)
        return EXIT_FAILURE
