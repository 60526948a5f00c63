import json
import math

import numpy as np
import pytest
from click.testing import CliRunner

from entropic.errors import ConfigError, DomainError
from entropic.grid import DensityField, Grid
from harness.cli import build_config, lab
from harness.experiment import FREE_PACKET, ExperimentConfig, default_config, load_config
from harness.reports import ComparisonReport, compare_fields
from harness.scenarios import run
from models.run import ExperimentRun

EIGENSTATE = {
    'grid': {'x_min': -5.0, 'x_max': 5.0, 'n_cells': 64},
    'params': {'mass': 1.0, 'hbar': 1.0, 'dt': 1e-3},
    'potential': {'kind': 'harmonic', 'omega': 1.0},
    'initial': {'kind': 'eigenstate', 'n': 0},
    't_final': 0.05,
    'snapshot_every': 25,
}

SMALL_ENSEMBLE = {
    'scenario': 'ensemble',
    'grid': {'x_min': -4.0, 'x_max': 4.0, 'n_cells': 64},
    'params': {'mass': 1.0, 'hbar': 1.0, 'dt': 0.02},
    'initial': {'kind': 'gaussian', 'mu': 0.0, 'sigma': 0.5},
    't_final': 0.2,
    'ensemble_size': 5000,
    'seed': 99,
    'snapshot_every': 5,
    'options': {'drift_velocity': 0.5, 'trajectory_particles': 10,
                'scaling_dts': [1e-2, 1e-3], 'scaling_drift': 100.0},
}

SMALL_MEASURE = dict(EIGENSTATE, scenario='measure', seed=7,
                     options={'sites': 16, 'count': 20000})


def write_config(tmp_path, data, name='config.json'):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def invoke(app, args):
    return CliRunner().invoke(lab, args, obj={'app': app})


class TestCompareFields:
    def test_identical_fields_have_zero_distance(self):
        grid = Grid(-1.0, 1.0, 16)
        a = DensityField.uniform(grid)
        for metric in ('L1', 'L2', 'sup'):
            assert compare_fields(a, a, metric) == 0.0

    def test_shifted_deltas_are_disjoint(self):
        grid = Grid(0.0, 1.0, 10)
        a = np.zeros(10)
        b = np.zeros(10)
        a[3] = 1.0 / grid.dx
        b[4] = 1.0 / grid.dx
        assert compare_fields(DensityField(grid, a), DensityField(grid, b), 'L1') == pytest.approx(2.0)

    def test_noisy_gaussian_matches_direct_quadrature(self):
        grid = Grid(-5.0, 5.0, 200)
        a = DensityField.from_function(grid, lambda x: np.exp(-x ** 2 / 2))
        noise = np.random.default_rng(1).uniform(-0.01, 0.01, grid.n_cells)
        b = DensityField(grid, a.values * (1 + noise))
        difference = np.abs(a.values - b.values)

        assert compare_fields(a, b, 'L1') == pytest.approx(difference.sum() * grid.dx)
        assert compare_fields(a, b, 'L2') == pytest.approx(math.sqrt((difference ** 2).sum() * grid.dx))
        assert compare_fields(a, b, 'sup') == pytest.approx(difference.max())

    def test_grid_mismatch_and_unknown_metric(self):
        a = DensityField.uniform(Grid(0.0, 1.0, 10))
        with pytest.raises(DomainError):
            compare_fields(a, DensityField.uniform(Grid(0.0, 1.0, 20)), 'L1')
        with pytest.raises(DomainError):
            compare_fields(a, a, 'L3')


def test_report_pass_flag_follows_tolerance():
    assert ComparisonReport('compare', 'L2', 5e-5, 1e-4).passed
    assert not ComparisonReport('compare', 'L2', 2e-4, 1e-4).passed
    assert ComparisonReport('measure', 'p', 0.2, 1e-3, bound='lower').passed
    assert not ComparisonReport('compare', 'L2', float('nan'), 1e-4).passed


class TestExperimentConfig:
    def test_round_trip_is_idempotent(self):
        config = default_config('ensemble')
        text = config.to_json()
        again = ExperimentConfig.from_json(text)

        assert again.to_json() == text
        assert ExperimentConfig.from_json(again.to_json()).to_dict() == config.to_dict()

    def test_stochastic_scenarios_need_a_seed(self):
        data = dict(SMALL_ENSEMBLE)
        del data['seed']
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(data)

    @pytest.mark.parametrize('change', [
        {'scenario': 'teleport'},
        {'potential': {'kind': 'quartic'}},
        {'initial': {'kind': 'cat'}},
        {'t_final': 0.0},
        {'grid': {'x_min': 1.0, 'x_max': 0.0, 'n_cells': 64}},
        {'seed': -1},
    ])
    def test_invalid_fields_are_config_errors(self, change):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(dict(SMALL_ENSEMBLE, **change))

    @pytest.mark.parametrize('base, options', [
        (SMALL_ENSEMBLE, {'boundary': 'periodc'}),
        (SMALL_ENSEMBLE, {'acceptance_bin': 16}),
        (SMALL_MEASURE, {'setup': 'fouirer'}),
        (SMALL_MEASURE, {'amplifier': 'bogus'}),
        (SMALL_MEASURE, {'sites': 7}),
        (SMALL_MEASURE, ['sites', 16]),
    ])
    def test_invalid_options_are_config_errors(self, base, options):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(dict(base, options=options))

    def test_bad_json_is_a_config_error(self, tmp_path):
        path = tmp_path / 'broken.json'
        path.write_text('{"scenario": ')
        with pytest.raises(ConfigError):
            load_config(str(path))
        with pytest.raises(ConfigError):
            load_config(str(tmp_path / 'missing.json'))

    def test_command_line_overrides(self, tmp_path):
        path = write_config(tmp_path, SMALL_ENSEMBLE)
        config = build_config('ensemble', path, out='elsewhere', seed=5)

        assert config.seed == 5
        assert config.output_dir == 'elsewhere'
        assert config.ensemble_size == 5000


class TestScenarios:
    def test_fields_on_a_stationary_state(self, tmp_path):
        config = ExperimentConfig.from_dict(dict(EIGENSTATE, scenario='fields',
                                                 output_dir=str(tmp_path)))
        result = run(config)

        assert result.exit_code == 0, result.to_dict()
        header = (tmp_path / 'fields.csv').read_text().splitlines()[0]
        assert header == 't,x,rho,Phi,v,u,eps_local'
        report = json.loads((tmp_path / 'report.json').read_text())
        assert report['passed']
        assert {r['metric'] for r in report['reports']} >= {'mass_drift', 'energy_drift'}

    def test_schrodinger_on_a_stationary_state(self, tmp_path):
        config = ExperimentConfig.from_dict(dict(EIGENSTATE, scenario='schrodinger',
                                                 output_dir=str(tmp_path)))
        result = run(config)

        assert result.exit_code == 0, result.to_dict()
        header = (tmp_path / 'schrodinger.csv').read_text().splitlines()[0]
        assert header == 't,x,rho,Phi,v,u,eps_local,re,im'

    def test_compare_on_a_stationary_state(self, tmp_path):
        config = ExperimentConfig.from_dict(dict(EIGENSTATE, scenario='compare',
                                                 output_dir=str(tmp_path)))
        result = run(config)

        assert result.exit_code == 0, result.to_dict()
        l2 = next(r for r in result.reports if r.metric == 'density_L2')
        assert l2.value < 1e-4

    def test_unstable_step_is_a_numerical_failure(self, tmp_path):
        data = dict(EIGENSTATE, scenario='fields', output_dir=str(tmp_path))
        data['params'] = {'mass': 1.0, 'hbar': 1.0, 'dt': 0.5}
        result = run(ExperimentConfig.from_dict(data))

        assert result.exit_code == 3
        assert result.error['error'] == 'CFLViolation'
        assert 'suggested_dt' in result.error['diagnostics']

    def test_measure_ideal_amplifier(self, tmp_path):
        config = ExperimentConfig.from_dict(dict(SMALL_MEASURE, output_dir=str(tmp_path)))
        result = run(config)

        assert result.exit_code == 0, result.to_dict()
        reports = {r.metric: r for r in result.reports}
        assert reports['ideal_posterior_defect'].value == 0.0
        assert reports['chi_square_p_value'].passed
        assert reports['bayes_coherence'].passed
        assert (tmp_path / 'frequencies.csv').exists()

    def test_maxent_verify_small(self, tmp_path):
        data = {'scenario': 'maxent-verify',
                'grid': {'x_min': -5.2, 'x_max': 6.2, 'n_cells': 1024},
                'seed': 3, 'output_dir': str(tmp_path),
                'options': {'samples': 20000, 'scaling_alphas': [1.0, 10.0]}}
        result = run(ExperimentConfig.from_dict(data))

        reports = {r.metric: r for r in result.reports}
        assert reports['total_variation'].passed
        assert reports['alpha_relative_error'].passed
        assert (tmp_path / 'kernel.csv').exists()

    def test_maxent_grid_must_cover_the_kernel(self, tmp_path):
        data = {'scenario': 'maxent-verify', 'grid': {'x_min': -1, 'x_max': 1, 'n_cells': 1024},
                'seed': 3, 'output_dir': str(tmp_path), 'options': {'samples': 100}}
        result = run(ExperimentConfig.from_dict(data))

        assert result.exit_code == 2
        assert 'must cover' in result.error['message']

    def test_free_packet_solvers_agree(self, tmp_path):
        data = dict(FREE_PACKET, scenario='compare', output_dir=str(tmp_path),
                    grid={'x_min': -7.0, 'x_max': 7.0, 'n_cells': 140},
                    params={'mass': 1.0, 'hbar': 1.0, 'dt': 1e-3},
                    t_final=0.5, snapshot_every=100)
        result = run(ExperimentConfig.from_dict(data))

        assert result.exit_code == 0, result.to_dict()
        reports = {r.metric: r for r in result.reports}
        assert reports['density_L2'].value < 1e-4
        assert reports['current_velocity_distance'].value < 1e-3

    @pytest.mark.parametrize('scenario', ['fields', 'compare'])
    def test_state_with_a_node_stays_stationary(self, tmp_path, scenario):
        data = dict(EIGENSTATE, scenario=scenario, output_dir=str(tmp_path),
                    grid={'x_min': -7.0, 'x_max': 7.0, 'n_cells': 128},
                    initial={'kind': 'eigenstate', 'n': 1}, t_final=0.5, snapshot_every=100)
        result = run(ExperimentConfig.from_dict(data))

        assert result.exit_code == 0, result.to_dict()

    def test_ensemble_reports_the_binned_acceptance_metric(self, tmp_path):
        data = dict(SMALL_ENSEMBLE, output_dir=str(tmp_path),
                    options=dict(SMALL_ENSEMBLE['options'], acceptance_l1=0.2))
        result = run(ExperimentConfig.from_dict(data))

        reports = {r.metric: r for r in result.reports}
        binned = reports['binned_histogram_vs_propagator_L1']
        assert binned.tolerance == 0.2
        assert binned.passed
        assert binned.value <= reports['histogram_vs_propagator_L1'].value


def test_ensemble_output_is_byte_identical(tmp_path):
    first = ExperimentConfig.from_dict(dict(SMALL_ENSEMBLE, output_dir=str(tmp_path / 'a')))
    second = ExperimentConfig.from_dict(dict(SMALL_ENSEMBLE, output_dir=str(tmp_path / 'b'),
                                             options=dict(SMALL_ENSEMBLE['options'], workers=3)))
    repeat = ExperimentConfig.from_dict(dict(SMALL_ENSEMBLE, output_dir=str(tmp_path / 'c')))
    for config in (first, second, repeat):
        run(config)

    for name in ('trajectory.csv', 'histogram.csv'):
        assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes()
    for name in ('trajectory.csv', 'histogram.csv', 'report.json'):
        assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'c' / name).read_bytes()
    header = (tmp_path / 'a' / 'trajectory.csv').read_text().splitlines()[0]
    assert header == 'step,time,particle_id,x'


def test_measure_output_is_byte_identical(tmp_path):
    for name in ('a', 'b'):
        run(ExperimentConfig.from_dict(dict(SMALL_MEASURE, output_dir=str(tmp_path / name))))

    report = json.loads((tmp_path / 'a' / 'report.json').read_text())
    assert 'runtime' not in report
    assert all('runtime' not in r for r in report['reports'])
    for name in ('measurement.json', 'frequencies.csv', 'report.json'):
        assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes()


def test_classical_limit_small(tmp_path):
    data = {'scenario': 'classical-limit',
            'grid': {'x_min': -3.0, 'x_max': 3.0, 'n_cells': 120},
            'params': {'mass': 1.0, 'hbar': 1.0, 'dt': 1e-3},
            'potential': {'kind': 'harmonic', 'omega': 1.0},
            't_final': 0.5, 'ensemble_size': 2000, 'seed': 12, 'output_dir': str(tmp_path),
            'options': {'hbar_values': [1e-2, 1e-3], 'x0': 1.0, 'p0': 0.0}}
    result = run(ExperimentConfig.from_dict(data))

    assert result.exit_code == 0, result.to_dict()
    reports = {r.metric: r for r in result.reports}
    assert reports['classical_energy_drift'].passed
    assert reports['deviation_slope_error'].value < 0.1
    assert (tmp_path / 'limit.csv').exists()


class TestCommandLine:
    def test_missing_seed_exits_with_config_error(self, app, tmp_path):
        data = dict(SMALL_ENSEMBLE)
        del data['seed']
        result = invoke(app, ['ensemble', '--config', write_config(tmp_path, data)])

        assert result.exit_code == 2
        assert ExperimentRun.query.count() == 0

    def test_misspelt_option_exits_with_config_error(self, app, tmp_path):
        data = dict(SMALL_ENSEMBLE, options=dict(SMALL_ENSEMBLE['options'], boundary='periodc'))
        result = invoke(app, ['ensemble', '--config', write_config(tmp_path, data)])

        assert result.exit_code == 2
        assert ExperimentRun.query.count() == 0

    def test_run_is_recorded_in_the_ledger(self, app, tmp_path):
        path = write_config(tmp_path, dict(EIGENSTATE, scenario='fields'))
        result = invoke(app, ['fields', '--config', path, '--out', str(tmp_path / 'out'),
                              '--quiet'])

        assert result.exit_code == 0, result.output
        run_record = ExperimentRun.query.one()
        assert run_record.scenario == 'fields'
        assert run_record.status == 'passed'
        assert run_record.output_dir == str(tmp_path / 'out')
        assert {c.metric for c in run_record.comparisons} >= {'mass_drift', 'energy_drift'}

    def test_seed_flag_overrides_the_file(self, app, tmp_path):
        path = write_config(tmp_path, SMALL_MEASURE)
        result = invoke(app, ['measure', '--config', path, '--seed', '21',
                              '--out', str(tmp_path / 'out')])

        assert result.exit_code == 0, result.output
        assert ExperimentRun.query.one().seed == 21
        assert 'ideal_posterior_defect' in result.output

    def test_numerical_failure_exits_3(self, app, tmp_path):
        data = dict(EIGENSTATE, scenario='fields')
        data['params'] = {'mass': 1.0, 'hbar': 1.0, 'dt': 0.5}
        result = invoke(app, ['fields', '--config', write_config(tmp_path, data),
                              '--out', str(tmp_path / 'out')])

        assert result.exit_code == 3
        assert ExperimentRun.query.one().status == 'numerical-error'
