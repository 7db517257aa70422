import json

import pytest

from layeredpulse.cli import EXIT_CONFIG, EXIT_FAILED, EXIT_OK, _overrides, build_parser, main
from layeredpulse.studies import STUDIES, build_study


def test_parser_subcommands():
    parser = build_parser()
    args = parser.parse_args(['--seed', '7', 'mc', '--eps', '0.01', '--n', '50'])
    assert args.command == 'mc'
    assert _overrides(args) == ['master_seed=7', 'numerics.eps=0.01', 'numerics.n_real=50']
    args = parser.parse_args(['--set', 'numerics.L=2', 'travel-time', '--n', '2000'])
    assert _overrides(args) == ['numerics.L=2', 'numerics.n_travel=2000']
    with pytest.raises(SystemExit):
        parser.parse_args(['bogus'])


def test_every_study_builds():
    for name in STUDIES:
        study = build_study(name)
        assert study.label == name
        assert study.required == ['config']
    with pytest.raises(ValueError):
        build_study('bogus')


def test_validate(capsys):
    assert main(['validate']) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out['valid'] is True
    assert len(out['config_hash']) == 64


def test_validate_reports_errors(capsys):
    assert main(['--set', 'medium.alpha=0.6', 'validate']) == EXIT_CONFIG
    out = json.loads(capsys.readouterr().out)
    assert out['valid'] is False
    assert 'medium' in out['errors']


def test_invalid_config_skips_run(tmp_path):
    status = main(['--output-dir', str(tmp_path), '--threads', '0', 'coefficients'])
    assert status == EXIT_CONFIG
    assert not (tmp_path / 'coefficients').exists()


def test_run_writes_manifest(tmp_path):
    status = main(['--output-dir', str(tmp_path), '--seed', '4', '--scenario', 'gamma-half',
                   '--set', 'numerics.omegas=[1.0]', 'coefficients'])
    assert status == EXIT_OK
    folder = tmp_path / 'coefficients'
    manifest = json.loads((folder / 'manifest.json').read_text())
    assert manifest['study'] == 'coefficients'
    assert manifest['master_seed'] == 4
    assert manifest['config']['numerics']['omegas'] == [1.0]
    assert manifest['report']['passed'] is True
    assert [a['name'] for a in manifest['artifacts']] == ['coefficients.csv']
    assert (folder / 'coefficients.csv').exists()
    assert not (folder / 'failures.json').exists()


def test_failed_check_exit_status(tmp_path):
    status = main(['--output-dir', str(tmp_path), '--tol-scale', '1e-12',
                   '--set', 'numerics.omegas=[1.0]', 'coefficients'])
    assert status == EXIT_FAILED
    failures = json.loads((tmp_path / 'coefficients' / 'failures.json').read_text())
    assert failures['study'] == 'coefficients'
    assert [f['name'] for f in failures['failures']] == ['dual_route']


def test_same_seed_same_artifact(tmp_path):
    for folder in ('a', 'b'):
        main(['--output-dir', str(tmp_path / folder), '--seed', '11',
              '--set', 'numerics.eps=0.05', '--set', 'numerics.n_modes=64', 'medium'])
    first = (tmp_path / 'a' / 'medium' / 'medium.csv').read_bytes()
    second = (tmp_path / 'b' / 'medium' / 'medium.csv').read_bytes()
    assert first == second
    assert first.startswith(b'z,')


def test_pulse_csv_columns(tmp_path):
    status = main(['--output-dir', str(tmp_path), '--scenario', 'fig3',
                   '--set', 'numerics.n_s=46', 'pulse'])
    assert status != EXIT_CONFIG
    folder = tmp_path / 'pulse'
    header = (folder / 'pulse.csv').read_text().splitlines()[0]
    assert header == 's,y1,p_hom,p_medium,p_limit,p_medium_beta_0.166667'
    manifest = json.loads((folder / 'manifest.json').read_text())
    checks = {c['name']: c['passed'] for c in manifest['report']['checks']}
    assert checks['attenuated_limit']
    assert checks['attenuated_beta_0.5']
    assert 'attenuated_beta_0.166667' in checks
