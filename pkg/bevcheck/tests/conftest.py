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
Common fixtures for check tests
"""
from copy import deepcopy

import pytest

import bevcheck
import bevcheck.all_checks  # noqa F401
from bevgrad.tensor import checked_mode
from lidarbev.config import build_config


@pytest.fixture(autouse=True)
def checked():
    with checked_mode(True):
        yield


@pytest.fixture
def run_config(tmp_path):
    return build_config({'output_dir': str(tmp_path)})


@pytest.fixture
def checks_spec_disabled():
    return {key: {'enabled': False} for key in bevcheck.metadata.checks}


@pytest.fixture
def isolated(checks_spec_disabled, run_config, tmp_path):
    """
    Returns a factory of runners with only the given check enabled, parameters overridden.
    """

    def make(key, **parameters):
        spec = deepcopy(checks_spec_disabled)
        spec[key] = {'enabled': True, 'parameters': parameters}
        return bevcheck.runners.CheckRunner(
            checks_spec=spec, checks_data={'run_config': run_config, 'output_dir': tmp_path}
        )

    return make
