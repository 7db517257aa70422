"""
Run configuration: scenario presets, config files and command-line
overrides merged into a validated `RunConfig`.
"""
import copy, hashlib, json, logging, os
from dataclasses import dataclass, field, asdict
from typing import Optional

from layeredpulse.exceptions import ConfigError
from layeredpulse.helpers import _flatten, _load_schema, _parse_value, _set_dotted
from layeredpulse.medium import MediumParams
from layeredpulse.processors import ProcessSchema
from layeredpulse.validation import ExtendedValidator

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = 'LAYEREDPULSE_OUTPUT_DIR'

DEFAULT_NUMERICS = {
    'L': 1.0,
    'eps': 5e-3,
    'eps_ladder': [2e-2, 1e-2, 5e-3],
    'l0_ladder': [1e-1, 1e-2, 1e-3],
    'omega': 1.0,
    'omegas': [0.25, 0.5, 1.0, 2.0, 4.0, 8.0],
    'omega_pair': [1.0, 1.5],
    'kappa': [0.0],
    'n_real': 400,
    'n_modes': 512,
    'n_paths': 10000,
    'sde_dz': 1e-3,
    'sde_scheme': 'heun',
    'defect_dz': 1e-4,
    's_min': -3.0,
    's_max': 6.0,
    'n_s': 181,
    'y_grid': [0.0],
    'omega_cut': 0.05,
    'omega_max': 8.0,
    'compare_beta': [0.5],
    'n_travel': 400,
    'hurst_eps': 1e-3,
    'hurst_linear_eps': 1e-5,
    'n_hurst': 200,
    'delay_eps': 1e-3,
    'n_delay': 20,
    'kk_band': [0.25, 8.0],
    'weyl_gamma': 0.5,
}

DEFAULT_TOLERANCES = {
    'gamma_limit': 0.02,
    'dual_route': 1e-4,
    'homogeneous_peak': 1e-6,
    'homogeneous_abs': 1e-5,
    'z_score': 3.0,
    'defect_ode': 1e-8,
    'defect_sde': 1e-6,
    'slope': 0.1,
    'hurst': 0.05,
    'variance_constant': 0.1,
    'delay': 0.05,
    'kk': 0.05,
    'lorentzian': 1e-3,
    'weyl': 1e-3,
}

_scenarios = None


def scenarios():
    """
    Lookup of the built-in scenario presets.
    """
    global _scenarios
    if _scenarios is None:
        _scenarios = ProcessSchema('scenarios.json')
    return _scenarios


def scenario_document(name):
    """
    Config fragment of a named scenario preset.
    """
    try:
        preset = scenarios().analyze(scenario=name)
    except ValueError as e:
        raise ConfigError(
            f"Unknown scenario {name!r}; options are {scenarios().keys}.",
            errors={'scenario': [str(e)]}
        ) from e
    return {
        'scenario': name,
        'medium': dict(preset['medium']),
        'numerics': {'L': preset['L'], 'compare_beta': list(preset['compare_beta'])},
    }


def default_document():
    return {
        'scenario': None,
        'master_seed': 0,
        'output_dir': 'output',
        'threads': 1,
        'tol_scale': 1.0,
        'medium': MediumParams().to_dict(),
        'numerics': copy.deepcopy(DEFAULT_NUMERICS),
        'tolerances': dict(DEFAULT_TOLERANCES),
    }


def _merge(base, update):
    """
    Recursively merge `update` into a copy of `base`.
    """
    out = copy.deepcopy(base)
    for key, val in update.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _nest(doc):
    """
    Expand dotted keys such as `a.kind` found inside sections.
    """
    nested = {}
    for key, val in doc.items():
        if isinstance(val, dict):
            val = _nest(val)
        _set_dotted(nested, key, val)
    return nested


def parse_overrides(overrides):
    """
    Parse `section.key=value` strings into a nested `dict`.
    """
    doc = {}
    for item in overrides or []:
        if '=' not in item:
            raise ConfigError(
                f"Override {item!r} must have the form `section.key=value`.")
        key, text = item.split('=', 1)
        _set_dotted(doc, key.strip(), _parse_value(text))
    return doc


def validate_config(doc, schema='validation.json'):
    """
    Validate a config document, returning the `cerberus` error `dict`.
    """
    validator = ExtendedValidator(_load_schema(schema), allow_unknown=False)
    validator.validate(doc)
    return validator.errors


@dataclass
class RunConfig:
    """
    Validated run configuration.

    Parameters
    ----------
    scenario : str, optional
        Name of the scenario preset applied before the file.
    medium : dict
        Medium block, see `MediumParams.from_dict`.
    numerics : dict
        Ladders, grids and ensemble sizes.
    tolerances : dict
        Bounds of the acceptance checks, scaled by `tol_scale`.
    master_seed : int, default 0
    output_dir : str, default 'output'
    threads : int, default 1
    tol_scale : float, default 1.0
    """
    scenario: Optional[str] = None
    medium: dict = field(default_factory=lambda: MediumParams().to_dict())
    numerics: dict = field(default_factory=lambda: copy.deepcopy(DEFAULT_NUMERICS))
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    master_seed: int = 0
    output_dir: str = 'output'
    threads: int = 1
    tol_scale: float = 1.0

    @property
    def params(self):
        return MediumParams.from_dict(self.medium)

    def tol(self, name):
        return self.tolerances[name] * self.tol_scale

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, doc):
        return cls(**{key: copy.deepcopy(val) for key, val in doc.items()})

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, 'w') as f:
                f.write(text + '\n')
        return text

    def to_ini(self, path=None):
        """
        Write the `key = value` form; scalars of the run go to `[run]` and
        nested blocks use dotted keys inside their section.
        """
        doc = self.to_dict()
        lines = ['[run]']
        for key, val in doc.items():
            if not isinstance(val, dict):
                lines.append(f'{key} = {json.dumps(val)}')
        for key, val in doc.items():
            if isinstance(val, dict):
                lines.extend(['', f'[{key}]'])
                lines.extend(
                    f'{k} = {json.dumps(v)}' for k, v in _flatten(val).items())
        text = '\n'.join(lines) + '\n'
        if path is not None:
            with open(path, 'w') as f:
                f.write(text)
        return text

    def config_hash(self):
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode()).hexdigest()


def load_config(source=None, overrides=(), scenario=None, output_dir=None):
    """
    Build a `RunConfig` from defaults, a scenario preset, a config file and
    overrides, applied in that order.

    Parameters
    ----------
    source : dict, str, or path, optional
        INI or JSON config document.
    overrides : list of str, optional
        `section.key=value` strings, values parsed with JSON semantics.
    scenario : str, optional
        Scenario preset, taking precedence over one named in the file.
    output_dir : str, optional
        Output directory, taking precedence over the environment variable
        `LAYEREDPULSE_OUTPUT_DIR` and the file.

    Returns
    -------
    RunConfig
    """
    try:
        file_doc = _nest(_load_schema(source)) if source is not None else {}
    except (ValueError, TypeError) as e:
        raise ConfigError(f"Unable to read config: {e}") from e
    override_doc = parse_overrides(overrides)
    name = scenario or override_doc.get('scenario') or file_doc.get('scenario')

    doc = default_document()
    if name is not None:
        doc = _merge(doc, scenario_document(name))
    doc = _merge(doc, file_doc)
    doc = _merge(doc, override_doc)
    doc['scenario'] = name
    if os.environ.get(OUTPUT_DIR_ENV):
        doc['output_dir'] = os.environ[OUTPUT_DIR_ENV]
    if output_dir is not None:
        doc['output_dir'] = os.fspath(output_dir)

    errors = validate_config(doc)
    if errors:
        raise ConfigError(f"Config failed validation: {errors}", errors=errors)
    try:
        # Model-level checks not expressible in the schema
        MediumParams.from_dict(doc['medium'])
    except (ValueError, TypeError) as e:
        raise ConfigError(f"Invalid medium block: {e}", errors={'medium': [str(e)]}) from e
    config = RunConfig.from_dict(doc)
    logger.debug("Loaded config %s (scenario %s)", config.config_hash()[:12], name)
    return config
