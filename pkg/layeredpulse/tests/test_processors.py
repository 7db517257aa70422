import pytest

from layeredpulse.processors import ProcessFunction, ProcessSchema


def _speed(mu, beta=0.5):
    return mu * beta


REGIMES = {
    'label': 'regime',
    'parameters': ['gamma'],
    'actions': ['lt'],
    'data': {
        '1': {'regime': 'long_range'},
        'inf': {'regime': 'short_range'},
    },
}


def test_function_parameters_and_returns():
    pf = ProcessFunction(_speed, tags=['stage'])
    assert pf.label == '_speed'
    assert pf.parameters == ['mu', 'beta']
    assert pf.optional == ['beta']
    assert pf.returns == ['_speed']
    assert pf.tags == ['stage']


def test_function_analyze_stores_under_label():
    pf = ProcessFunction(_speed, label='speed')
    assert pf.analyze(mu=2.0) == {'speed': 1.0}
    assert pf(mu=2.0, beta=1.0) == {'speed': 2.0}


def test_function_rejects_non_callable():
    with pytest.raises(ValueError):
        ProcessFunction(3.0)


def test_schema_threshold_lookup():
    ps = ProcessSchema(REGIMES)
    assert ps.parameters == ['gamma']
    assert ps.returns == ['regime']
    assert ps.analyze(gamma=0.5) == {'regime': 'long_range'}
    assert ps.analyze(gamma=1.5) == {'regime': 'short_range'}


def test_schema_missing_parameter():
    with pytest.raises(KeyError):
        ProcessSchema(REGIMES).analyze(beta=0.5)


def test_schema_structure_errors():
    with pytest.raises(KeyError):
        ProcessSchema({'label': 'x', 'parameters': [], 'actions': []})
    with pytest.raises(ValueError):
        ProcessSchema({**REGIMES, 'actions': ['lt', 'gt']})
    with pytest.raises(ValueError):
        ProcessSchema({**REGIMES, 'actions': ['near']})


@pytest.mark.parametrize('gamma, expected', [
    (0.5, 'long_range'), (1.0, 'critical'), (1.5, 'short_range'),
])
def test_packaged_regime_table(gamma, expected):
    ps = ProcessSchema('regimes.json')
    assert ps.returns == ['regime', 'sigma_law']
    assert ps.analyze(gamma=gamma)['regime'] == expected


def test_packaged_scenarios_get_lookup():
    ps = ProcessSchema('scenarios.json')
    assert 'front-comparison' in ps.keys
    preset = ps.analyze(scenario='front-comparison')
    assert preset['L'] == 5.0
    assert preset['medium']['mu'] == 2.0
    with pytest.raises(ValueError):
        ps.analyze(scenario='bogus')
