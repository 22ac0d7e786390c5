from typing import Any, Dict, List, Optional, Sequence
import copy
import os
from pathlib import Path

import yaml

from vpflow.errors import ConfigurationError

SECTIONS = ('run', 'datum', 'background', 'kernel', 'grid', 'tracers', 'functionals', 'experiment')
SAMPLING_MODES = ('random', 'lattice', 'x1-resolved')
# subcommands whose theory covers only omega = +1
REPULSIVE_ONLY = ('existence',)

# free-form mappings whose keys are not checked against the defaults
FREE_FORM = {('datum', 'parameters'), ('background', 'parameters')}


def get_run_parameters() -> Dict[str, Any]:
    """Get the default settings tree (desk scale)"""
    return {
        'run': {
            'dim': 3,
            'omega': 1,  # +1 repulsive, -1 attractive
            'dt': 0.01,
            'T': 0.5,
            'count': 1000,
            'seed': 1,
            'seeds': [1, 2, 3],  # medians for monotone verdicts
            'sample_every': 1,
            'diagnostic_every': 1,
            'threads': 1,
            'deterministic': True,
        },
        'datum': {
            'kind': 'gaussian',
            'mass': 1.0,
            'parameters': {'sigma_x': 1.0, 'sigma_v': 1.0},
            'sampling': 'random',  # 'random', 'lattice' or 'x1-resolved'
            'lattice_half_width': 3.0,
            'lattice_points': 6,
            'x1_points': 96,  # midpoints per line for 'x1-resolved'
        },
        'background': {
            'kind': 'zero',
            'mass': 0.0,
            'parameters': {},
        },
        'kernel': {
            'softening': 0.1,
            'method': 'direct-sum',
            'chunk_pairs': 400000,
        },
        'grid': {
            'half_width': 4.0,
            'cells': 16,
        },
        'tracers': {
            'enabled': True,
            'half_width': 1.0,
            'points_per_axis': 4,
            'seed': None,
        },
        'functionals': {
            'r': 1.0,
            'lambda': 4.0,
            'gamma': 0.1,
            'delta': 0.01,
            'alpha': 0.3,
            'lambdas': [1.0, 2.0, 4.0, 8.0, 16.0],
            'gammas': [0.05, 0.1, 0.2],
        },
        'experiment': {
            'sequence': [],
            'noise_seed': 7,
            'times': [],  # stability sample times; empty means T/2 and T
            'translation_p': 1.25,
            'shifts': [0.5, 1.0, 2.0],  # lengths along x1, rounded to grid nodes
            'moments': ['one', 'x1', 'v2', 'gauss', 'cos_x1'],
            'energy_tolerance': 1e-3,
            'mollified_energy_slack': 0.02,
            'l1_floor': 0.5,
            'deviation_drop': 0.2,
            'moment_rate_slack': 2.0,  # n x moment error stays within this factor of its first value
            'histogram_bins': 6,
            'kernel_levels': 6,
            'mollifier_truncation': 3.0,
        },
    }


def default_output_root() -> Path:
    """Output root from VPFLOW_OUTPUT_ROOT, falling back to ./runs"""
    return Path(os.environ.get('VPFLOW_OUTPUT_ROOT', 'runs'))


def merge_run_settings(base_settings: Dict[str, Any], override_settings: Dict[str, Any]) -> Dict[str, Any]:
    """Merge settings with overrides"""
    merged = copy.deepcopy(base_settings)

    for key, value in override_settings.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_run_settings(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)

    return merged


def _check_keys(settings: Dict[str, Any], defaults: Dict[str, Any], path: Sequence[str] = ()) -> None:
    for key, value in settings.items():
        where = '.'.join(list(path) + [str(key)])
        if key not in defaults:
            valid = ', '.join(sorted(defaults))
            raise ConfigurationError(f"unknown setting {where!r}; valid keys: {valid}")
        if tuple(path) + (key,) in FREE_FORM:
            if not isinstance(value, dict):
                raise ConfigurationError(f"setting {where!r} must be a mapping")
            continue
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ConfigurationError(f"setting {where!r} must be a mapping")
            _check_keys(value, defaults[key], list(path) + [str(key)])


def _number(section: Dict[str, Any], key: str, where: str, minimum: Optional[float] = None,
            strict: bool = True, integer: bool = False):
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"{where}.{key} must be a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigurationError(f"{where}.{key} must be an integer, got {value!r}")
    if minimum is not None and (value <= minimum if strict else value < minimum):
        relation = '>' if strict else '>='
        raise ConfigurationError(f"{where}.{key} must be {relation} {minimum}, got {value}")
    return int(value) if integer else float(value)


def _number_list(section: Dict[str, Any], key: str, where: str) -> List[float]:
    values = section[key]
    if not isinstance(values, (list, tuple)):
        raise ConfigurationError(f"{where}.{key} must be a list")
    out = []
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigurationError(f"{where}.{key} entries must be numbers, got {v!r}")
        out.append(float(v))
    return out


def validate_run_settings(settings: Dict[str, Any], command: Optional[str] = None) -> Dict[str, Any]:
    """Validate and normalize a full settings tree, applying the physics guards.

    With `command`, the guards that subcommand adds apply too.
    """
    defaults = get_run_parameters()
    _check_keys(settings, defaults)
    validated = merge_run_settings(defaults, settings)

    run = validated['run']
    run['dim'] = _number(run, 'dim', 'run', integer=True)
    if run['dim'] not in (1, 2, 3):
        raise ConfigurationError(f"run.dim must be 1, 2 or 3, got {run['dim']}")
    run['omega'] = _number(run, 'omega', 'run', integer=True)
    if run['omega'] not in (1, -1):
        raise ConfigurationError(f"run.omega must be +1 or -1, got {run['omega']}")
    run['dt'] = _number(run, 'dt', 'run', 0.0)
    run['T'] = _number(run, 'T', 'run', 0.0)
    if run['T'] < run['dt']:
        raise ConfigurationError(f"run.T ({run['T']}) must be at least run.dt ({run['dt']})")
    run['count'] = _number(run, 'count', 'run', 0, integer=True)
    run['seed'] = _number(run, 'seed', 'run', 0, strict=False, integer=True)
    run['seeds'] = [int(s) for s in _number_list(run, 'seeds', 'run')] or [run['seed']]
    run['sample_every'] = _number(run, 'sample_every', 'run', 0, integer=True)
    run['diagnostic_every'] = _number(run, 'diagnostic_every', 'run', 0, integer=True)
    run['threads'] = max(1, min(64, _number(run, 'threads', 'run', 0, integer=True)))
    run['deterministic'] = bool(run['deterministic'])

    datum = validated['datum']
    datum['mass'] = _number(datum, 'mass', 'datum', 0.0)
    if datum['sampling'] not in SAMPLING_MODES:
        raise ConfigurationError(
            f"datum.sampling must be one of {', '.join(SAMPLING_MODES)}, got {datum['sampling']!r}"
        )
    datum['lattice_half_width'] = _number(datum, 'lattice_half_width', 'datum', 0.0)
    datum['lattice_points'] = _number(datum, 'lattice_points', 'datum', 0, integer=True)
    datum['x1_points'] = _number(datum, 'x1_points', 'datum', 1, integer=True)
    if datum['sampling'] == 'x1-resolved' and datum['x1_points'] > run['count']:
        raise ConfigurationError(
            f"run.count ({run['count']}) must be at least datum.x1_points ({datum['x1_points']})"
        )

    background = validated['background']
    background['mass'] = _number(background, 'mass', 'background', 0.0, strict=False)

    kernel = validated['kernel']
    kernel['softening'] = _number(kernel, 'softening', 'kernel', 0.0, strict=False)
    kernel['chunk_pairs'] = _number(kernel, 'chunk_pairs', 'kernel', 0, integer=True)

    grid = validated['grid']
    grid['half_width'] = _number(grid, 'half_width', 'grid', 0.0)
    grid['cells'] = _number(grid, 'cells', 'grid', 1, strict=False, integer=True)

    tracers = validated['tracers']
    tracers['enabled'] = bool(tracers['enabled'])
    tracers['half_width'] = _number(tracers, 'half_width', 'tracers', 0.0)
    tracers['points_per_axis'] = _number(tracers, 'points_per_axis', 'tracers', 0, integer=True)

    functionals = validated['functionals']
    for key in ('r', 'lambda', 'gamma', 'delta', 'alpha'):
        functionals[key] = _number(functionals, key, 'functionals', 0.0)
    if functionals['alpha'] >= 1.0 / 3.0:
        raise ConfigurationError(f"functionals.alpha must lie in (0, 1/3), got {functionals['alpha']}")
    functionals['lambdas'] = sorted(_number_list(functionals, 'lambdas', 'functionals'))
    functionals['gammas'] = _number_list(functionals, 'gammas', 'functionals')

    experiment = validated['experiment']
    experiment['sequence'] = _number_list(experiment, 'sequence', 'experiment')
    experiment['times'] = _number_list(experiment, 'times', 'experiment')
    experiment['shifts'] = _number_list(experiment, 'shifts', 'experiment')
    experiment['translation_p'] = _number(experiment, 'translation_p', 'experiment', 1.0)
    for key in ('energy_tolerance', 'mollified_energy_slack', 'l1_floor', 'deviation_drop',
                'moment_rate_slack', 'mollifier_truncation'):
        experiment[key] = _number(experiment, key, 'experiment', 0.0)
    experiment['histogram_bins'] = _number(experiment, 'histogram_bins', 'experiment', 0, integer=True)
    experiment['kernel_levels'] = _number(experiment, 'kernel_levels', 'experiment', 1, integer=True)

    _physics_guards(validated)
    _command_guards(validated, command)
    return validated


def _physics_guards(settings: Dict[str, Any]) -> None:
    dim = settings['run']['dim']
    background = settings['background']
    if background['kind'] == 'comoving':
        return
    if dim <= 2 and abs(background['mass'] - settings['datum']['mass']) > 1e-12 * settings['datum']['mass']:
        raise ConfigurationError(
            f"for N={dim} finite-energy runs need a background of the datum's mass "
            f"({settings['datum']['mass']}), got {background['mass']}"
        )
    if dim == 3 and background['kind'] == 'power':
        exponent = float(background['parameters'].get('exponent', 0.0))
        if exponent >= 2.0:
            raise ConfigurationError("N=3 needs rho_b in L^p for some p > 3/2")


def _command_guards(settings: Dict[str, Any], command: Optional[str]) -> None:
    omega = settings['run']['omega']
    if command in REPULSIVE_ONLY and omega != 1:
        raise ConfigurationError(
            f"the {command} suite covers the repulsive case omega = +1 only; omega = {omega} was requested"
        )


def parse_overrides(overrides: Sequence[str]) -> Dict[str, Any]:
    """Turn 'section.key=value' strings into a nested mapping; values are YAML scalars"""
    tree: Dict[str, Any] = {}
    for item in overrides:
        if '=' not in item:
            raise ConfigurationError(f"override {item!r} is not of the form section.key=value")
        path, raw = item.split('=', 1)
        keys = [k for k in path.strip().split('.') if k]
        if len(keys) < 2:
            raise ConfigurationError(f"override {item!r} needs a section and a key")
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as e:
            raise ConfigurationError(f"cannot parse override value {raw!r}: {e}") from e
        node = tree
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigurationError(f"override {item!r} conflicts with an earlier one")
        node[keys[-1]] = value
    return tree


def load_settings_file(path: Optional[str]) -> Dict[str, Any]:
    if path is None:
        return {}
    try:
        with open(path, 'r', encoding='utf-8') as fh:
            data = yaml.safe_load(fh)
    except OSError as e:
        raise ConfigurationError(f"cannot read config file {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigurationError(f"config file {path} is not valid YAML: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"config file {path} must hold a mapping of sections")
    return data


def resolve_settings(config_path: Optional[str] = None, overrides: Sequence[str] = (),
                     extra: Optional[Dict[str, Any]] = None, command: Optional[str] = None) -> Dict[str, Any]:
    """Defaults, then the config file, then --set overrides, then explicit flags; validated"""
    settings = load_settings_file(config_path)
    settings = merge_run_settings(settings, parse_overrides(overrides))
    if extra:
        settings = merge_run_settings(settings, extra)
    return validate_run_settings(settings, command)
