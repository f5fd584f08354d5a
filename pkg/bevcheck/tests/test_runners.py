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

import json
from copy import deepcopy

import pytest

import bevcheck
from lidarbev.scan import scan
from bevcheck.common import Check
from bevcheck.metadata import EXPERIMENT_CHECKS
from bevcheck.runners import CheckRunner
from bevcheck.suite import REPORT_FILE, run_selftest


class TestApi:
    """
    Tests for API compliancy of checks
    """

    def test_all_checks_have_version(self):
        missing_versions = {
            chk.__name__: chk.version for chk in CheckRunner._check_classes
            if chk.version in (None, (0, 0, 0))
        }
        assert not bool(missing_versions)

    def test_every_registered_check_is_described(self):
        keys = [chk.key for chk in CheckRunner._check_classes]
        assert sorted(keys) == sorted(bevcheck.metadata.checks)
        assert len(set(keys)) == len(keys)

    def test_experiment_checks_disabled_by_default(self):
        for key in EXPERIMENT_CHECKS:
            assert bevcheck.metadata.checks[key].params['enabled'] is False

    def test_spec_overrides_parameters(self, isolated):
        runner = isolated('scanOracle', lengths=[3])
        check = next(chk for chk in runner.checks if chk.key == 'scanOracle')
        assert check.parameters['lengths'] == [3]
        assert check.parameters['tolerance'] == 1e-10
        assert check.report_type == 'error'

    def test_rng_depends_on_key_not_order(self, run_config):
        runner = CheckRunner({}, {'run_config': run_config})
        runner.collector.collect()
        first, second = runner.checks[0], runner.checks[1]
        assert first.rng().integers(1 << 30) == first.rng().integers(1 << 30)
        assert first.rng().integers(1 << 30) != second.rng().integers(1 << 30)


class TestRunnerSelection:

    def test_isolate_checks(self, run_config):
        runner = CheckRunner({}, {'run_config': run_config})
        runner.isolate_checks(['hilbertCurve'])
        assert [chk.key for chk in runner.checks if chk.is_enabled()] == ['hilbertCurve']

    def test_blacklist_and_whitelist(self, run_config):
        runner = CheckRunner({}, {'run_config': run_config})
        runner.blacklist_checks(['convOracle'])
        runner.whitelist_checks(['trainingGate'])
        enabled = {chk.key for chk in runner.checks if chk.is_enabled()}
        assert 'convOracle' not in enabled
        assert 'trainingGate' in enabled

    def test_runall_and_reset(self, isolated):
        runner = isolated('hilbertCurve', max_order_2d=3, max_order_3d=2)
        assert runner.runall() is True
        assert runner.passed is True
        assert runner.format_reports() == []
        runner.reset()
        assert runner.passed is None


class TestFailureReporting:

    def test_failed_error_check(self, isolated, mocker):
        mocker.patch('bevcheck.oracles.scan_recurrence', side_effect=lambda *args: scan(*args).data + 1.0)
        runner = isolated('scanOracle', lengths=[4])
        assert runner.runall() is False
        assert runner.has_errors()
        assert runner.warning_messages() == []
        (message,) = runner.error_messages()
        assert message.startswith(bevcheck.metadata.checks['scanOracle'].msg)
        (report,) = runner.format_reports('error')
        assert report['identifier'] == 'scanOracle'
        assert report['items'][0]['item'] == 'length 4'
        assert report['items'][0]['found'] == pytest.approx(1.0)

    def test_failed_warning_check_is_not_an_error(self, checks_spec_disabled, run_config, mocker):
        report = mocker.Mock()
        report.full_beats_baseline.return_value = False
        report.mean_iou.side_effect = lambda variant: {'full': 0.4, 'baseline_lc': 0.5}[variant]
        mocker.patch('bevcheck.experiment_checks.ablation_experiment', return_value=report)
        spec = deepcopy(checks_spec_disabled)
        spec['ablationDirection'] = {'enabled': True}
        runner = CheckRunner(spec, {'run_config': run_config})
        assert runner.runall() is False
        assert not runner.has_errors()
        assert len(runner.warning_messages()) == 1
        assert runner.format_reports('error') == []

    def test_run_all_report_per_check(self, isolated):
        runner = isolated('boxMask', instances=1)
        reports = list(runner.run_all_report_per_check())
        assert [report['identifier'] for report in reports] == ['boxMask']
        assert reports[0]['passed'] is True
        assert runner.passed is True

    def test_base_check_run_is_abstract(self):

        class Bare(Check):
            key = 'convOracle'

        with pytest.raises(NotImplementedError):
            Bare().run()


class TestSelftest:

    def test_writes_report(self, run_config, checks_spec_disabled, tmp_path):
        spec = deepcopy(checks_spec_disabled)
        spec['hilbertCurve'] = {'enabled': True, 'parameters': {'max_order_2d': 2, 'max_order_3d': 1}}
        result = run_selftest(run_config, tmp_path / 'selftest', checks_spec=spec)
        assert result.passed
        assert result.failed == []
        data = json.loads((tmp_path / 'selftest' / REPORT_FILE).read_text())
        assert data['passed'] is True
        assert [check['identifier'] for check in data['checks']] == ['hilbertCurve']
        assert data['versions']['hilbertCurve'] == [0, 1, 0]

    def test_experiments_flag_enables_experiment_checks(self, run_config, checks_spec_disabled, tmp_path, mocker):
        run = mocker.patch.object(CheckRunner, 'run_all_report_per_check', return_value=iter([]))
        whitelist = mocker.spy(CheckRunner, 'whitelist_checks')
        run_selftest(run_config, tmp_path, experiments=True, checks_spec=checks_spec_disabled)
        assert run.called
        assert tuple(whitelist.call_args[0][1]) == EXPERIMENT_CHECKS
