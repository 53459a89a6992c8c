import json

import pytest

import main
from simulation import EXIT_CONFIG, EXIT_OK
from suites import SUITES


def write_run_file(tmp_path, extra=''):
    path = tmp_path / 'run.cfg'
    path.write_text(f"""
[grid]
nx = 8
ny = 8

[physics]
mu = 1.0
kappa = 1.0
alpha = 0.5
thetaB_spec = affine(1, 0, -1)
{extra}

[run]
t_end = 0.05
out_dir = {tmp_path / 'out'}
""")
    return path


def test_poincare_command(capsys):
    assert main.main(['poincare', '--nx', '8', '--ny', '8']) == EXIT_OK
    assert 'C_p =' in capsys.readouterr().out


def test_run_command(tmp_path):
    path = write_run_file(tmp_path)
    assert main.main(['run', '--config', str(path)]) == EXIT_OK
    assert (tmp_path / 'out' / 'diagnostics.csv').exists()


def test_run_command_reports_config_errors(tmp_path):
    path = write_run_file(tmp_path, extra='gamma = 1.5')
    assert main.main(['run', '--config', str(path)]) == EXIT_CONFIG


def test_stability_command(tmp_path, capsys):
    path = write_run_file(tmp_path)
    assert main.main(['stability', '--config', str(path)]) == EXIT_OK
    result = json.loads(capsys.readouterr().out)
    assert result['satisfied'] is True
    assert (tmp_path / 'out' / 'stability.json').exists()


def test_equilibrium_command(tmp_path):
    path = write_run_file(tmp_path)
    assert main.main(['equilibrium', '--config', str(path)]) == EXIT_OK
    assert (tmp_path / 'out' / 'equilibrium.bin').exists()


def test_verify_command_writes_report(tmp_path):
    path = write_run_file(tmp_path)
    options = json.dumps({'workers': 1, 'T': 0.1})
    status = main.main(['verify', '--suite', 'uniqueness', '--config', str(path), '--out',
                        str(tmp_path / 'verify' / 'uniqueness'), '--options', options])
    assert status == EXIT_OK
    report = json.loads((tmp_path / 'verify' / 'uniqueness' / 'verify_uniqueness.json').read_text())
    assert report['suite'] == 'uniqueness' and report['passed']


def test_unknown_suite_is_a_usage_error():
    with pytest.raises(SystemExit) as info:
        main.main(['verify', '--suite', 'nonexistent'])
    assert info.value.code == 2


def test_verify_without_suite_is_a_usage_error():
    with pytest.raises(SystemExit) as info:
        main.main(['verify'])
    assert info.value.code == 2


def test_verify_lists_suites(capsys):
    assert main.main(['verify', '--list']) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert [line.split()[0] for line in lines] == sorted(SUITES)
    assert any(line.startswith('budget') for line in lines)


def test_verify_info_shows_effective_options(tmp_path, capsys):
    path = write_run_file(tmp_path)
    status = main.main(['verify', '--suite', 'budget', '--info', '--config', str(path),
                        '--out', str(tmp_path / 'budget'), '--options', json.dumps({'t_end': 0.05})])
    assert status == EXIT_OK
    info = json.loads(capsys.readouterr().out)
    assert info['name'] == 'budget'
    assert info['options']['t_end'] == 0.05
    assert info['options']['refinement'] == 2
    assert not (tmp_path / 'budget' / 'verify_budget.json').exists()
