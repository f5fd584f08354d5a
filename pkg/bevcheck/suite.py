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
Runs the registered checks as one selftest and writes `selftest.json`.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

from lidarbev.config import RunConfig

from bevcheck.metadata import EXPERIMENT_CHECKS
from bevcheck.runners import CheckRunner


logger = logging.getLogger(__name__)

REPORT_FILE = 'selftest.json'


@dataclass
class SelftestResult:
    passed: bool
    reports: List[Dict] = field(default_factory=list)
    path: Optional[Path] = None

    @property
    def failed(self) -> List[str]:
        return [report['identifier'] for report in self.reports if not report['passed']]


def run_selftest(run_config: RunConfig, out_dir: Union[str, Path], experiments: bool = False,
                 checks_spec: Optional[Dict] = None) -> SelftestResult:
    """
    Runs every enabled check against `run_config`.

    Args:
        run_config: resolved run config; experiment checks train with it
        out_dir: directory for the JSON report and experiment CSVs
        experiments: also enable the training, ablation and robustness checks
        checks_spec: per-check parameter overrides keyed by check key

    Returns:
        SelftestResult, passed unless an error-type check failed; failed warning-type
        checks are logged and reported only
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    CheckRunner.import_checks()
    runner = CheckRunner(checks_spec or {}, {'run_config': run_config, 'output_dir': out_dir})
    if experiments:
        runner.whitelist_checks(EXPERIMENT_CHECKS)

    reports = list(runner.run_all_report_per_check())
    for message in runner.warning_messages():
        logger.warning(message)
    for message in runner.error_messages():
        logger.error(message)

    result = SelftestResult(not runner.has_errors(), reports)
    result.path = out_dir / REPORT_FILE
    result.path.write_text(json.dumps({
        'passed': result.passed,
        'versions': {cls.key: list(version) for cls, version in runner.get_versions().items()},
        'checks': reports,
    }, indent=2, default=float))
    logger.info('Selftest %s: %d checks run, %d failed', 'passed' if result.passed else 'failed',
                len(reports), len(result.failed))
    return result
