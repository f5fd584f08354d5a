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
Gathers what the checks run against: the resolved run config, the base seed and the
directory experiment checks may write into.
"""

from pathlib import Path
from typing import Optional, Union

from lidarbev.config import RunConfig, build_config


class FixtureCollector:

    def __init__(self, run_config: Optional[RunConfig] = None, output_dir: Optional[Union[str, Path]] = None):
        self.run_config = run_config
        self.output_dir = output_dir
        self.seed = 0

    def collect(self) -> None:
        self.run_config = self.get_run_config(self.run_config)
        self.seed = self.get_seed()
        self.output_dir = self.get_output_dir(self.output_dir)

    @staticmethod
    def get_run_config(run_config: Optional[RunConfig]) -> RunConfig:
        return run_config if run_config is not None else build_config()

    def get_seed(self) -> int:
        return self.run_config.seed

    def get_output_dir(self, output_dir: Optional[Union[str, Path]]) -> Path:
        return Path(output_dir if output_dir is not None else self.run_config.output_dir)
