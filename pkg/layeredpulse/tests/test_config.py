import json

import pytest

from layeredpulse.config import (
    OUTPUT_DIR_ENV, RunConfig, load_config, parse_overrides, scenario_document,
    validate_config, default_document,
)
from layeredpulse.exceptions import ConfigError
from layeredpulse.medium import MediumParams


def test_defaults_validate():
    assert validate_config(default_document()) == {}
    config = load_config()
    assert config.scenario is None
    assert config.params == MediumParams()
    assert config.numerics['eps_ladder'] == [2e-2, 1e-2, 5e-3]


@pytest.mark.parametrize('name', [
    'path-long-range', 'path-short-range', 'front-comparison', 'gamma-half', 'gamma-critical', 'gamma-short',
    'fig2-left', 'fig2-right', 'fig3',
])
def test_scenarios_load(name):
    config = load_config(scenario=name)
    assert config.scenario == name
    assert config.params.gamma in (0.5, 1.0, pytest.approx(1.5))


def test_front_comparison_scenario():
    doc = scenario_document('front-comparison')
    assert doc['numerics']['L'] == 5.0
    config = load_config(scenario='front-comparison')
    assert config.numerics['L'] == 5.0
    assert config.numerics['compare_beta'] == pytest.approx([0.5, 1 / 6])
    assert config.params.gamma == 0.5


@pytest.mark.parametrize('alias, name', [
    ('fig2-left', 'path-long-range'),
    ('fig2-right', 'path-short-range'),
    ('fig3', 'front-comparison'),
])
def test_alias_scenarios_match(alias, name):
    a, b = load_config(scenario=alias), load_config(scenario=name)
    assert a.params == b.params
    assert a.numerics == b.numerics


def test_unknown_scenario():
    with pytest.raises(ConfigError):
        scenario_document('bogus')


def test_parse_overrides():
    doc = parse_overrides(['medium.alpha=0.3', 'numerics.kappa=[0, 1]', 'master_seed=4'])
    assert doc == {'medium': {'alpha': 0.3}, 'numerics': {'kappa': [0, 1]}, 'master_seed': 4}
    with pytest.raises(ConfigError):
        parse_overrides(['medium.alpha'])


@pytest.mark.parametrize('override, field', [
    ('medium.alpha=0.6', 'medium'),
    ('medium.theta.cap=1.0', 'medium'),
    ('numerics.kappa=[20.0]', 'numerics'),
    ('numerics.s_min=7.0', 'numerics'),
    ('numerics.omegas=[]', 'numerics'),
    ('tolerances.z_score=0', 'tolerances'),
    ('threads=0', 'threads'),
    ('bogus=1', 'bogus'),
])
def test_invalid_overrides_rejected(override, field):
    with pytest.raises(ConfigError) as info:
        load_config(overrides=[override])
    assert field in info.value.errors


def test_propagating_kappa_accepted():
    config = load_config(overrides=['numerics.kappa=[0.0, 5.0]'])
    assert config.numerics['kappa'] == [0.0, 5.0]


def test_precedence(tmp_path):
    path = tmp_path / 'run.json'
    path.write_text(json.dumps({'medium': {'mu': 3.0}, 'master_seed': 7}))
    config = load_config(str(path), scenario='front-comparison')
    assert config.medium['mu'] == 3.0
    assert config.medium['beta'] == 0.5
    assert config.master_seed == 7
    config = load_config(str(path), ['medium.mu=4.0'], scenario='front-comparison')
    assert config.medium['mu'] == 4.0


def test_output_dir_sources(tmp_path, monkeypatch):
    assert load_config().output_dir == 'output'
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / 'env'))
    assert load_config().output_dir == str(tmp_path / 'env')
    assert load_config(output_dir=tmp_path / 'arg').output_dir == str(tmp_path / 'arg')


def test_ini_round_trip(tmp_path):
    config = load_config(scenario='gamma-short', overrides=['master_seed=11', 'numerics.n_real=50'])
    path = tmp_path / 'run.ini'
    config.to_ini(path)
    text = path.read_text()
    assert '[run]' in text and 'a.kind = "indicator"' in text
    loaded = load_config(str(path))
    assert loaded.numerics['n_real'] == 50
    assert loaded.master_seed == 11
    assert loaded.params == config.params


def test_json_round_trip(tmp_path):
    config = load_config(overrides=['numerics.eps=1e-3'])
    path = tmp_path / 'run.json'
    config.to_json(path)
    loaded = load_config(str(path))
    assert loaded.to_dict() == config.to_dict()
    assert loaded.config_hash() == config.config_hash()


def test_hash_and_tolerance_scale():
    config = load_config(overrides=['tol_scale=2.0'])
    assert config.tol('z_score') == 6.0
    other = load_config(overrides=['tol_scale=2.0', 'master_seed=1'])
    assert other.config_hash() != config.config_hash()
    assert RunConfig.from_dict(config.to_dict()).config_hash() == config.config_hash()


def test_unreadable_source():
    with pytest.raises(ConfigError):
        load_config('missing-run-file.ini')
