import json

import pytest

from suites import SUITES, SuiteError, SuiteRegistry, VerificationSuite


class AlwaysFailing(VerificationSuite):
    NAME = 'failing'
    DESCRIPTION = 'Fails on purpose'

    def evaluate(self):
        member = self.run_member('only', self.config)
        self.check('impossible', False, counterexample=member.state, label='only', value=1.0)
        self.check('later', False, counterexample=member.state)


def run_suite(name, config, tmp_path, **options):
    suite = SuiteRegistry().create(name, config, {'workers': 1, **options}, tmp_path / name)
    return suite.run()


def test_registry_knows_all_suites():
    registry = SuiteRegistry()
    assert registry.names() == sorted(SUITES)
    assert set(registry.list_suites()) == set(SUITES)
    with pytest.raises(SuiteError):
        registry.get('nonexistent')


def test_registry_register_and_unregister(small_config, tmp_path):
    registry = SuiteRegistry()
    registry.register('failing', AlwaysFailing)
    assert 'failing' in registry.names()
    suite = registry.create('failing', small_config, {'workers': 1}, tmp_path)
    assert suite.get_info()['name'] == 'failing'
    registry.unregister('failing')
    assert 'failing' not in registry.names()


def test_failed_check_leaves_first_counterexample(small_config, tmp_path):
    report = AlwaysFailing(small_config, {'workers': 1}, tmp_path).run()
    assert not report.passed
    assert report.counterexample.endswith('counterexample_only.bin')
    assert (tmp_path / 'counterexample_only.bin').exists()
    assert not (tmp_path / 'counterexample_later.bin').exists()
    saved = json.loads(report.save(tmp_path / 'report.json').read_text())
    assert saved['passed'] is False
    assert [c['name'] for c in saved['checks']] == ['impossible', 'later']


def test_maxprinciple_suite(small_config, tmp_path):
    report = run_suite('maxprinciple', small_config, tmp_path, alphas=[0.1, 0.9], grid=(8, 8), t_end=0.2)
    assert report.passed, report.checks
    assert report.violations['max_principle'] == 0


def test_bounds_suite(small_config, tmp_path):
    report = run_suite('bounds', small_config, tmp_path, alphas=[0.5], seeds=[1, 2], grids=[(8, 8)], t_end=0.3)
    assert report.passed, report.checks


def test_dissipativity_suite(small_config, tmp_path):
    report = run_suite('dissipativity', small_config, tmp_path, amplitudes=[1.0, 10.0], t_end=3.0, discard=1.5)
    assert report.passed, report.checks


def test_ergodic_suite(small_config, tmp_path):
    report = run_suite('ergodic', small_config, tmp_path, t_end=3.0, discard=1.5)
    assert report.passed, report.checks


def test_stability_suite(small_config, tmp_path):
    report = run_suite('stability', small_config, tmp_path, tol_steady=1e-7, max_T=20.0, t_end=0.5)
    assert report.passed, report.checks
    margin = next(c for c in report.checks if c['name'] == 'positive_margin')
    assert margin['margin'] > 0.0


def test_rayleigh_suite(small_config, tmp_path):
    report = run_suite('rayleigh', small_config, tmp_path, t_end=0.5, skip=0.05, final_ratio=1e-4,
                       r2_min=0.9, tol_steady=1e-7, max_T=20.0)
    assert report.passed, report.checks
    condition = next(c for c in report.checks if c['name'] == 'condition_satisfied')
    assert condition['lhs'] == pytest.approx(1.0)


def test_uniqueness_suite(small_config, tmp_path):
    report = run_suite('uniqueness', small_config, tmp_path, T=0.3)
    assert report.passed, report.checks
    rate = next(c for c in report.checks if c['name'] == 'eigenmode_rate')
    assert rate['relative_error'] <= 0.05


def test_budget_suite(small_config, tmp_path):
    report = run_suite('budget', small_config, tmp_path)
    assert report.passed, report.checks
    assert report.violations['energy_sign'] == 0
    for name in ('ke_budget_refinement', 'thermal_budget_refinement'):
        ratio = next(c for c in report.checks if c['name'] == name)
        assert 3.0 <= ratio['ratio'] <= 5.0
        assert ratio['expected'] == 4.0
        assert ratio['fine'] < ratio['coarse']
