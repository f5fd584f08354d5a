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

import logging
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from lidarbev.config import build_config  # noqa E402
from bevcheck.runners import CheckRunner  # noqa E402

logging.basicConfig(level=logging.INFO)

enabled_checks = {
    'dilationSetAlgebra': {
        'enabled': True,
        'type': 'error',
        'parameters': {
            'instances': 10,
            'tau': 0.4,
        }
    }
}

CheckRunner.import_checks()
runner = CheckRunner(
    checks_spec=enabled_checks, checks_data={'run_config': build_config(), 'output_dir': Path('runs/example')}
)
runner.isolate_checks(enabled_checks.keys())
runner.runall()
reports = runner.format_reports()
print(reports)
