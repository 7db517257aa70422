from layeredpulse.validation import ExtendedValidator


def test_cross_field_comparisons():
    schema = {
        's_min': {'type': 'number', 'less_than': 's_max'},
        's_max': {'type': 'number', 'greater_than_equal': ['s_min']},
        'n': {'type': 'integer', 'not_equal': 'm'},
        'm': {'type': 'integer', 'equal': 'n_copy'},
        'n_copy': {'type': 'integer'},
    }
    v = ExtendedValidator(schema)
    assert v.validate({'s_min': -3.0, 's_max': 6.0, 'n': 1, 'm': 2, 'n_copy': 2})
    assert not v.validate({'s_min': 6.0, 's_max': 6.0, 'n': 2, 'm': 2, 'n_copy': 2})
    assert set(v.errors) == {'s_min', 'n'}


def test_comparison_against_missing_field():
    v = ExtendedValidator({'a': {'type': 'number', 'less_than': 'b'}})
    assert not v.validate({'a': 1.0})
    assert 'not provided' in v.errors['a'][0]


def test_exclusive_bounds_on_scalars_and_lists():
    v = ExtendedValidator({
        'alpha': {'type': 'number', 'exclusive_max': 0.5},
        'eps': {'type': 'list', 'exclusive_min': 0},
    })
    assert v.validate({'alpha': 0.25, 'eps': [1e-2, 5e-3]})
    assert not v.validate({'alpha': 0.5, 'eps': [1e-2, 0.0]})
    assert set(v.errors) == {'alpha', 'eps'}


def test_propagating_channels():
    schema = {
        'eps': {'type': 'number'},
        'ladder': {'type': 'list'},
        'c0': {'type': 'number'},
        'kappa': {'type': 'list', 'propagating': [['eps', 'ladder'], 'c0']},
    }
    v = ExtendedValidator(schema)
    assert v.validate({'eps': 5e-3, 'ladder': [1e-2], 'c0': 1.0, 'kappa': [0.0, 5.0]})
    # The largest eps of the ladder decides
    assert not v.validate({'eps': 5e-3, 'ladder': [2e-2], 'c0': 1.0, 'kappa': [8.0]})
    assert 'Evanescent' in v.errors['kappa'][0]
    assert not v.validate({'eps': 5e-3, 'kappa': [1.0]})


def test_propagating_nested_lookup():
    schema = {
        'medium': {'type': 'dict', 'schema': {'c0': {'type': 'number'}}},
        'numerics': {'type': 'dict', 'schema': {
            'eps': {'type': 'number'},
            'kappa': {'type': 'list', 'propagating': ['numerics.eps', 'medium.c0']},
        }},
    }
    v = ExtendedValidator(schema)
    assert v.validate({'medium': {'c0': 2.0}, 'numerics': {'eps': 1e-2, 'kappa': [4.0]}})
    assert not v.validate({'medium': {'c0': 2.0}, 'numerics': {'eps': 1e-2, 'kappa': [5.0]}})
