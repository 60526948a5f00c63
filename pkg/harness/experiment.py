"""Experiment configuration: JSON schema, defaults per scenario and resolution
into grids, potentials and initial states.

Schema (natural units ħ = m = 1 unless overridden)::

    {
      "scenario": "fields",
      "grid": {"x_min": -7, "x_max": 7, "n_cells": 700},
      "params": {"mass": 1, "hbar": 1, "dt": 1e-4},
      "potential": {"kind": "none" | "harmonic" | "table", "omega": 1, "values": [...]},
      "initial": {"kind": "gaussian" | "eigenstate", "mu": 0, "sigma": 1, "k": 0, "n": 0},
      "t_final": 1.0,
      "ensemble_size": 200000,
      "seed": 12345,
      "output_dir": "results/fields",
      "snapshot_every": 1000,
      "options": {...scenario specific...}
    }
"""
from dataclasses import dataclass, field
import copy
import json
import logging

from entropic.ensemble import Boundary
from entropic.errors import ConfigError, DomainError
from entropic.grid import Grid, PhysicalParams, PotentialField
from entropic.states import (
    gaussian_packet, harmonic_eigenstate, harmonic_potential, tabulated_potential
)

logger = logging.getLogger(__name__)

SCENARIOS = ('maxent-verify', 'ensemble', 'fields', 'schrodinger', 'compare',
             'measure', 'classical-limit')
STOCHASTIC_SCENARIOS = ('ensemble', 'measure', 'classical-limit')
POTENTIAL_KINDS = ('none', 'harmonic', 'table')
INITIAL_KINDS = ('gaussian', 'eigenstate')
OPTION_CHOICES = {
    'boundary': tuple(boundary.value for boundary in Boundary),
    'setup': ('identity', 'fourier'),
    'amplifier': ('ideal', 'nearest_neighbour'),
}

FREE_PACKET = {
    'grid': {'x_min': -7.0, 'x_max': 7.0, 'n_cells': 700},
    'params': {'mass': 1.0, 'hbar': 1.0, 'dt': 1e-4},
    'potential': {'kind': 'none'},
    'initial': {'kind': 'gaussian', 'mu': 0.0, 'sigma': 1.0, 'k': 0.0},
    't_final': 1.0,
    'snapshot_every': 1000,
}

DEFAULTS = {
    'maxent-verify': {
        'grid': {'x_min': -6.0, 'x_max': 7.0, 'n_cells': 4800},
        'params': {'mass': 1.0, 'hbar': 1.0, 'dt': 1e-3},
        't_final': 1.0,
        'seed': 12345,
        'options': {'alpha': 2.0, 'drift_gradient': 1.0, 'samples': 10000000,
                    'scaling_alphas': [1.0, 10.0, 100.0, 1000.0]},
    },
    'ensemble': {
        'grid': {'x_min': -4.0, 'x_max': 4.0, 'n_cells': 256},
        'params': {'mass': 1.0, 'hbar': 1.0, 'dt': 1e-3},
        'initial': {'kind': 'gaussian', 'mu': 0.0, 'sigma': 0.5, 'k': 0.0},
        't_final': 0.1,
        'ensemble_size': 1000000,
        'seed': 12345,
        'snapshot_every': 10,
        'options': {'drift_velocity': 0.5, 'boundary': 'periodic', 'workers': 1,
                    'trajectory_particles': 100, 'acceptance_bin': 8, 'acceptance_l1': 5e-3,
                    'scaling_dts': [1e-2, 1e-3, 1e-4, 1e-5], 'scaling_drift': 100.0},
    },
    'fields': FREE_PACKET,
    'schrodinger': FREE_PACKET,
    'compare': FREE_PACKET,
    'measure': {
        'grid': {'x_min': -5.0, 'x_max': 5.0, 'n_cells': 512},
        'params': {'mass': 1.0, 'hbar': 1.0, 'dt': 1e-4},
        'potential': {'kind': 'harmonic', 'omega': 1.0},
        'initial': {'kind': 'eigenstate', 'n': 0},
        't_final': 0.1,
        'seed': 12345,
        'snapshot_every': 1000,
        'options': {'sites': 64, 'setup': 'identity', 'amplifier': 'ideal', 'leak': 0.0,
                    'count': 1000000},
    },
    'classical-limit': {
        'grid': {'x_min': -3.0, 'x_max': 3.0, 'n_cells': 600},
        'params': {'mass': 1.0, 'hbar': 1.0, 'dt': 1e-3},
        'potential': {'kind': 'harmonic', 'omega': 1.0},
        't_final': 3.141592653589793,
        'ensemble_size': 10000,
        'seed': 12345,
        'options': {'hbar_values': [1e-2, 1e-3, 1e-4], 'x0': 1.0, 'p0': 0.0},
    },
}


@dataclass
class ExperimentConfig:
    scenario: str
    grid: Grid
    params: PhysicalParams
    potential: dict = field(default_factory=lambda: {'kind': 'none'})
    initial: dict = field(default_factory=lambda: {'kind': 'gaussian', 'mu': 0.0,
                                                   'sigma': 1.0, 'k': 0.0})
    t_final: float = 1.0
    ensemble_size: int = 0
    seed: int = None
    output_dir: str = None
    snapshot_every: int = 100
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f'Unknown scenario {self.scenario!r}',
                              {'known': list(SCENARIOS)})
        if self.potential.get('kind') not in POTENTIAL_KINDS:
            raise ConfigError(f'Unknown potential kind {self.potential.get("kind")!r}')
        if self.initial.get('kind') not in INITIAL_KINDS:
            raise ConfigError(f'Unknown initial state kind {self.initial.get("kind")!r}')
        if not self.t_final > 0:
            raise ConfigError(f't_final must be positive, got {self.t_final}')
        if int(self.snapshot_every) != self.snapshot_every or self.snapshot_every < 1:
            raise ConfigError('snapshot_every must be a positive integer')
        if self.seed is not None and (int(self.seed) != self.seed or self.seed < 0):
            raise ConfigError(f'seed must be a non-negative integer, got {self.seed!r}')
        if self.scenario in STOCHASTIC_SCENARIOS:
            if self.seed is None:
                raise ConfigError(f'Scenario {self.scenario!r} needs a seed')
            if self.scenario != 'measure' and self.ensemble_size < 1:
                raise ConfigError('ensemble_size must be at least 1')
        self._check_options()

    def _check_options(self):
        if not isinstance(self.options, dict):
            raise ConfigError('options must be a JSON object')
        for name, choices in OPTION_CHOICES.items():
            value = self.options.get(name)
            if value is not None and value not in choices:
                raise ConfigError(f'Unknown {name} {value!r}', {'known': list(choices)})
        if self.scenario == 'ensemble':
            self._check_divisor('acceptance_bin', self.options.get('acceptance_bin', 8), 8)
        elif self.scenario == 'measure':
            self._check_divisor('sites', self.options.get('sites', 64), 1)

    def _check_divisor(self, name, size, min_blocks):
        n = self.grid.n_cells
        if not isinstance(size, int) or size < 1 or n % size or n // size < min_blocks:
            raise ConfigError(f'{name} must divide n_cells={n} into at least {min_blocks} blocks, '
                              f'got {size!r}')

    def __repr__(self):
        return f'<ExperimentConfig {self.scenario} seed={self.seed}>'

    def to_dict(self):
        return {
            'scenario': self.scenario,
            'grid': self.grid.to_dict(),
            'params': self.params.to_dict(),
            'potential': dict(self.potential),
            'initial': dict(self.initial),
            't_final': self.t_final,
            'ensemble_size': self.ensemble_size,
            'seed': self.seed,
            'output_dir': self.output_dir,
            'snapshot_every': self.snapshot_every,
            'options': copy.deepcopy(self.options)
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError('Configuration must be a JSON object')
        if 'scenario' not in data:
            raise ConfigError('Configuration needs a scenario')
        try:
            return cls(
                scenario=data['scenario'],
                grid=Grid.from_dict(data['grid']),
                params=PhysicalParams.from_dict(data.get('params', {})),
                potential=dict(data.get('potential') or {'kind': 'none'}),
                initial=dict(data.get('initial') or {'kind': 'gaussian', 'mu': 0.0,
                                                     'sigma': 1.0, 'k': 0.0}),
                t_final=float(data.get('t_final', 1.0)),
                ensemble_size=int(data.get('ensemble_size') or 0),
                seed=data.get('seed'),
                output_dir=data.get('output_dir'),
                snapshot_every=data.get('snapshot_every', 100),
                options=copy.deepcopy(data.get('options') or {}))
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f'Invalid configuration: {exc}') from exc

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f'Configuration is not valid JSON: {exc}') from exc
        return cls.from_dict(data)

    def option(self, name, default=None):
        return self.options.get(name, default)


def default_config(scenario):
    if scenario not in DEFAULTS:
        raise ConfigError(f'Unknown scenario {scenario!r}', {'known': list(SCENARIOS)})
    data = copy.deepcopy(DEFAULTS[scenario])
    data['scenario'] = scenario
    return ExperimentConfig.from_dict(data)


def load_config(path, scenario=None):
    """Read a JSON config; a scenario given on the command line overrides the file."""
    try:
        with open(path, encoding='utf-8') as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigError(f'Cannot read configuration {path}: {exc}') from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f'Configuration {path} is not valid JSON: {exc}') from exc
    if scenario and isinstance(data, dict):
        data['scenario'] = scenario
    return ExperimentConfig.from_dict(data)


def resolve_potential(config):
    spec = config.potential
    kind = spec['kind']
    try:
        if kind == 'none':
            return PotentialField.zeros(config.grid)
        if kind == 'harmonic':
            return harmonic_potential(config.grid, config.params, float(spec.get('omega', 1.0)),
                                      float(spec.get('center', 0.0)))
        return tabulated_potential(config.grid, spec['values'])
    except (KeyError, DomainError) as exc:
        raise ConfigError(f'Cannot resolve potential: {exc}') from exc


def resolve_initial_state(config):
    """The initial wave function; (ρ, Φ) are derived from it for the field scenarios."""
    spec = config.initial
    try:
        if spec['kind'] == 'gaussian':
            return gaussian_packet(config.grid, float(spec.get('mu', 0.0)),
                                   float(spec.get('sigma', 1.0)), float(spec.get('k', 0.0)))
        if config.potential['kind'] != 'harmonic':
            raise ConfigError('Eigenstates are defined for the harmonic potential only')
        psi, _ = harmonic_eigenstate(config.grid, config.params,
                                     float(config.potential.get('omega', 1.0)),
                                     int(spec.get('n', 0)))
        return psi
    except DomainError as exc:
        raise ConfigError(f'Cannot resolve initial state: {exc}') from exc
