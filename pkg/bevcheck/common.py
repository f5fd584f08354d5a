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
Contains common checks functionality
"""

from copy import deepcopy
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

import bevcheck.metadata
import bevcheck.collector


class Check(object):

    key = None  # type: str  # subclass should define a key
    version = (0, 0, 0)  # type: tuple[int, int, int]  # subclass should override

    def __init__(self, checks_spec: Optional[Dict] = None, checks_data: Optional[Dict] = None,
                 collector: Optional['bevcheck.collector.FixtureCollector'] = None):
        self.metadata = bevcheck.metadata.checks[self.key]  # please register a new check there
        self.failures = []  # type: List[Union[str, Tuple]]
        self.params = deepcopy(self.metadata.params)
        if checks_spec is not None:
            self.params.update(checks_spec.get(self.key, {}))
        self.report_type = self.params.get('type', 'warning')  # type: str
        self.checks_data = checks_data
        self.collector = collector

    @property
    def passed(self) -> bool:
        return not bool(self.failures)

    @property
    def parameters(self) -> Dict:
        merged = deepcopy(self.metadata.params.get('parameters', {}))
        merged.update(self.params.get('parameters', {}))
        return merged

    def rng(self) -> np.random.Generator:
        """
        Generator seeded from the run seed and the check key; independent of check order.
        """
        seed = self.collector.seed if self.collector is not None else 0
        return np.random.default_rng([seed] + [ord(char) for char in self.key])

    def run(self) -> List[str]:
        """
        Perform the associated check.
        """
        raise NotImplementedError('The run() method of check needs to be overriden')

    def reset(self) -> None:
        """
        Resets check state so that its ready to be run again.
        """
        self.failures.clear()

    def is_enabled(self) -> bool:
        return self.params.get('enabled', False)

    def list_failures(self) -> List[str]:
        """
        Returns list of found issues for this check
        """
        return [self._failure_text(f) for f in self.failures]

    @staticmethod
    def _failure_text(failure) -> str:
        if isinstance(failure, tuple):
            item, expected, found = failure
            return '{}: expected {}, found {}'.format(item, expected, found)
        return str(failure)

    def fail_message(self, indent: str = '  ') -> str:
        """
        Returns failure message to display.
        If a check has failures, they are appended indented.
        """
        msg = '{}'.format(self.metadata.msg)
        failures = self.list_failures()
        if failures:
            msg += ':\n' + indent + ('\n' + indent).join(failures)
        return msg

    def format_failure(self, failure) -> Dict[str, object]:
        """
        Formats a single failure; tuple failures are (item, expected, found).
        """
        if isinstance(failure, tuple):
            item, expected, found = failure
            return {
                'message': self.metadata.item_msg.format(item=item),
                'item': item,
                'expected': expected,
                'found': found,
            }
        return {
            'message': self.metadata.item_msg.format(item=failure),
            'item': failure,
        }

    def format_report(self) -> Dict[str, object]:
        """
        Makes a report dictionary for the selftest JSON output.
        """
        return {
            'message': self.metadata.msg,
            'identifier': self.key,
            'msg_type': self.report_type,
            'version': list(self.version),
            'items': [self.format_failure(failure) for failure in self.failures],
        }

    def get_description(self) -> str:
        return self.metadata.check_description or ''
