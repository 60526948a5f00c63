"""Scenario runners. Each runner writes its CSV/JSON artifacts and returns the
list of ComparisonReports; ``run`` adds timing, error mapping and the summary."""
from dataclasses import dataclass, field
import logging
import math
import os
import time

import numpy as np

from entropic.ensemble import (
    Boundary, Ensemble, histogram, increment_scaling, propagate_density, reverse_kernel,
    asymmetry, sample_ensemble, step_ensemble, transition_kernel, wiener_increments
)
from entropic.errors import ConfigError, DomainError, LabError
from entropic.field_dynamics import (
    current_velocity, energy_drift, evolve_coupled, osmotic_velocity, total_energy
)
from entropic.grid import PhysicalParams, VelocityField
from entropic.maxent_kernel import (
    EXTENT_SIGMAS, build_kernel, constraint_for, kernel_scaling, maximize_entropy_oracle,
    total_variation
)
from entropic.measurement import (
    AmplifierModel, SetupUnitary, amplify_posterior, chi_square_test,
    end_to_end_measurement, predictive_distribution
)
from entropic.schrodinger_ref import (
    ClassicalState, classical_trajectory, evolve_schrodinger, from_wavefunction,
    hamiltonian_matrix, time_grid, time_reversal_defect, to_wavefunction
)
from entropic.states import coherent_width, free_packet_variance, harmonic_potential

from .experiment import resolve_initial_state, resolve_potential
from .export import (
    HISTOGRAM_HEADER, SNAPSHOT_HEADER, TRAJECTORY_HEADER, WAVEFUNCTION_HEADER,
    snapshot_rows, write_csv, write_json
)
from .reports import ComparisonReport, all_passed, compare_fields, weighted_velocity_distance

logger = logging.getLogger(__name__)

DEFAULT_SETTINGS = {
    'NEWTON_TOLERANCE': 1e-10,
    'NEWTON_MAX_ITERATIONS': 100,
    'DENSITY_FLOOR': 1e-12,
    'ENSEMBLE_WORKERS': 1,
    'RESULTS_DIR': 'results',
}


@dataclass
class ScenarioResult:
    scenario: str
    exit_code: int
    reports: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)
    runtime: float = 0.0
    output_dir: str = None
    error: dict = None

    @property
    def passed(self):
        return self.exit_code == 0

    def to_dict(self, timing=True):
        """Without timing the dict only holds what a seeded rerun reproduces."""
        data = {
            'scenario': self.scenario,
            'exit_code': self.exit_code,
            'passed': self.passed,
            'artifacts': [os.path.basename(path) for path in self.artifacts],
            'reports': [report.to_dict(timing) for report in self.reports],
            'error': self.error
        }
        if timing:
            data['runtime'] = self.runtime
            data['output_dir'] = self.output_dir
        return data


class _Context:
    """What a runner needs besides the config: output paths, settings and a clock."""

    def __init__(self, config, output_dir, settings):
        self.config = config
        self.output_dir = output_dir
        self.settings = settings
        self.artifacts = []
        self.reports = []
        self._started = time.perf_counter()

    def elapsed(self):
        return time.perf_counter() - self._started

    def path(self, name):
        return os.path.join(self.output_dir, name)

    def csv(self, name, header, rows):
        self.artifacts.append(write_csv(self.path(name), header, rows))

    def json(self, name, payload):
        self.artifacts.append(write_json(self.path(name), payload))

    def report(self, metric, value, tolerance, bound='upper'):
        report = ComparisonReport(self.config.scenario, metric, value, tolerance,
                                  runtime=self.elapsed(), bound=bound)
        log = logger.info if report.passed else logger.warning
        log('%s %s = %.6g (tolerance %g, %s)', self.config.scenario, metric, report.value,
            tolerance, 'pass' if report.passed else 'FAIL')
        self.reports.append(report)
        return report


def _field_snapshot_rows(times, densities, phases, V, p, psis=None):
    for index, (t, rho, phi) in enumerate(zip(times, densities, phases)):
        v = current_velocity(phi, p).values
        u = osmotic_velocity(rho, p).values
        eps = total_energy(rho, phi, V, p).local_energy
        psi = psis[index].values if psis is not None else None
        yield from snapshot_rows(t, rho.grid, rho.values, phi.values, v, u, eps, psi)


def _is_free_packet(config):
    return config.potential['kind'] == 'none' and config.initial['kind'] == 'gaussian' \
        and float(config.initial.get('k', 0.0)) == 0.0


def _width_error(config, rho, t):
    sigma0 = float(config.initial.get('sigma', 1.0))
    expected = free_packet_variance(sigma0, t, config.params)
    return abs(rho.variance() / expected - 1.0)


def run_maxent_verify(ctx):
    config = ctx.config
    alpha = float(config.option('alpha', 2.0))
    gradient = float(config.option('drift_gradient', 1.0))
    spec = constraint_for(alpha, [gradient])
    kernel = build_kernel(spec, alpha)
    support = config.grid
    reach = EXTENT_SIGMAS * kernel.std
    low, high = kernel.mean[0] - reach, kernel.mean[0] + reach
    if support.x_min > low or support.x_max < high:
        raise ConfigError(f'grid must cover [{low:.4g}, {high:.4g}] for alpha={alpha:g}',
                          {'grid': support.to_dict()})

    oracle = maximize_entropy_oracle(spec, support,
                                     tolerance=ctx.settings['NEWTON_TOLERANCE'],
                                     max_iterations=ctx.settings['NEWTON_MAX_ITERATIONS'])
    closed = kernel.discretize(support)
    ctx.report('total_variation', total_variation(closed, oracle), 1e-6)
    ctx.report('alpha_relative_error', abs(oracle.multipliers.alpha - alpha) / alpha, 1e-6)

    samples = int(config.option('samples', 10000000))
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    draws = kernel.sample(samples, rng)[:, 0]
    mean_z = abs(draws.mean() - kernel.mean[0]) / (draws.std(ddof=1) / math.sqrt(samples))
    squares = draws ** 2
    kappa_z = abs(squares.mean() - spec.kappa) / (squares.std(ddof=1) / math.sqrt(samples))
    ctx.report('moment_z_score', max(mean_z, kappa_z), 4.0)

    alphas = config.option('scaling_alphas', [1.0, 10.0, 100.0, 1000.0])
    mean_exponent, std_exponent = kernel_scaling([gradient], alphas, samples=samples, rng=rng)
    ctx.report('drift_exponent_error', abs(mean_exponent + 1.0), 0.05)
    ctx.report('fluctuation_exponent_error', abs(std_exponent + 0.5), 0.05)

    ctx.csv('kernel.csv', ['x', 'p_closed_form', 'p_oracle'],
            zip(support.centers, closed.probabilities, oracle.probabilities))
    return {'alpha': alpha, 'oracle_alpha': oracle.multipliers.alpha,
            'oracle_iterations': oracle.multipliers.iterations,
            'drift_exponent': mean_exponent, 'fluctuation_exponent': std_exponent}


def run_ensemble(ctx):
    config = ctx.config
    grid = config.grid
    n_steps, dt = time_grid(config.t_final, config.params.dt)
    p = config.params.with_dt(dt)
    boundary = Boundary(config.option('boundary', 'periodic'))
    workers = int(config.option('workers', ctx.settings['ENSEMBLE_WORKERS']))
    drift_speed = float(config.option('drift_velocity', 0.0))
    drift = VelocityField.constant(grid, drift_speed)
    kernel = transition_kernel(drift, p, boundary)

    rho0 = resolve_initial_state(config).density()
    ensemble = sample_ensemble(rho0, config.ensemble_size, config.seed)
    start = ensemble
    density = histogram(ensemble, grid)
    tracked = min(int(config.option('trajectory_particles', 100)), ensemble.size)

    rows = []

    def track(e):
        rows.extend((e.step, e.time, i, x) for i, x in enumerate(e.positions[:tracked]))

    track(ensemble)
    for step in range(1, n_steps + 1):
        ensemble = step_ensemble(ensemble, drift, p, boundary, workers)
        density = propagate_density(density, kernel)
        if step % config.snapshot_every == 0 or step == n_steps:
            track(ensemble)
    ctx.csv('trajectory.csv', TRAJECTORY_HEADER, rows)

    final = histogram(ensemble, grid)
    ctx.csv('histogram.csv', HISTOGRAM_HEADER, zip(grid.centers, final.values))
    n = ensemble.size
    ctx.report('histogram_vs_propagator_L1', compare_fields(final, density, 'L1'),
               5.0 * max(n ** -0.5, grid.dx))
    # the cell-level L1 sits on a multinomial floor of about (2/πN)^½ Σ p_i^½
    bin_cells = int(config.option('acceptance_bin', 8))
    ctx.report('binned_histogram_vs_propagator_L1',
               compare_fields(final.coarsened(bin_cells), density.coarsened(bin_cells), 'L1'),
               float(config.option('acceptance_l1', 5e-3)))

    t = config.t_final
    shift = ensemble.positions.mean() - start.positions.mean()
    ctx.report('mean_shift_error', abs(shift - drift_speed * t), 5.0 * math.sqrt(p.diffusion * t / n))
    growth = ensemble.positions.var() - start.positions.var()
    spread = start.positions.var() + p.diffusion * t
    ctx.report('variance_growth_error', abs(growth - p.diffusion * t),
               5.0 * math.sqrt(2.0 / n) * spread)

    increments = wiener_increments(config.seed, 0, n, p)
    ctx.report('fluctuation_variance_ratio_error',
               abs(increments.var() / (p.diffusion * p.dt) - 1.0), 5.0 * math.sqrt(2.0 / n))

    rho_next = propagate_density(rho0, kernel)
    reverse = reverse_kernel(kernel, rho0, rho_next)
    recovered = reverse.apply(rho_next)
    ctx.report('reverse_identity_residual', float(np.max(np.abs(recovered.values - rho0.values))),
               1e-9)
    ctx.report('reverse_asymmetry', asymmetry(reverse, kernel), 0.01, bound='lower')

    dts = config.option('scaling_dts', [1e-2, 1e-3, 1e-4, 1e-5])
    drift_exponent, fluctuation_exponent = increment_scaling(
        float(config.option('scaling_drift', 100.0)), p, dts,
        n_particles=min(n, 100000), seed=config.seed)
    ctx.report('drift_exponent_error', abs(drift_exponent - 1.0), 0.05)
    ctx.report('fluctuation_exponent_error', abs(fluctuation_exponent - 0.5), 0.05)
    return {'particles': n, 'steps': n_steps, 'outside': ensemble.count_outside(grid),
            'drift_exponent': drift_exponent, 'fluctuation_exponent': fluctuation_exponent}


def run_fields(ctx):
    config = ctx.config
    p = config.params
    V = resolve_potential(config)
    rho0, phi0 = from_wavefunction(resolve_initial_state(config), ctx.settings['DENSITY_FLOOR'])
    trajectory = evolve_coupled(rho0, phi0, V, p, config.t_final, config.snapshot_every)

    ctx.csv('fields.csv', SNAPSHOT_HEADER,
            _field_snapshot_rows(trajectory.times, trajectory.densities, trajectory.phases, V, p))
    ctx.json('energy.json', {'times': trajectory.times,
                             'energies': [e.to_dict() for e in trajectory.energies]})

    stationary = config.initial['kind'] == 'eigenstate'
    ctx.report('mass_drift', trajectory.mass_drift(), 1e-9)
    ctx.report('energy_drift', energy_drift(trajectory), 1e-8 if stationary else 1e-6)
    if stationary:
        deviation = max(float(np.max(np.abs(rho.values - rho0.values)))
                        for rho in trajectory.densities)
        ctx.report('density_stationarity', deviation, 1e-6)
    if _is_free_packet(config):
        ctx.report('width_law_relative_error',
                   _width_error(config, trajectory.densities[-1], trajectory.times[-1]), 1e-3)
    return {'steps': trajectory.n_steps, 'dt': trajectory.dt,
            'energy': trajectory.energies[-1].to_dict()}


def run_schrodinger(ctx):
    config = ctx.config
    p = config.params
    V = resolve_potential(config)
    psi0 = resolve_initial_state(config)
    trajectory = evolve_schrodinger(psi0, V, p, config.t_final, config.snapshot_every)

    floor = ctx.settings['DENSITY_FLOOR']
    fields = [from_wavefunction(psi, floor) for psi in trajectory.states]
    ctx.csv('schrodinger.csv', WAVEFUNCTION_HEADER,
            _field_snapshot_rows(trajectory.times, [f[0] for f in fields], [f[1] for f in fields],
                                 V, p, trajectory.states))

    ctx.report('norm_drift', trajectory.norm_drift(),
               1e-9 * max(1.0, trajectory.n_steps / 1e4))
    ctx.report('time_reversal_defect', time_reversal_defect(psi0, V, p, 100), 1e-10)
    if config.initial['kind'] == 'eigenstate':
        H = hamiltonian_matrix(config.grid, V, p)
        energy = float(np.real(np.vdot(psi0.values, H @ psi0.values)) * config.grid.dx)
        final = trajectory.states[-1]
        overlap = np.vdot(psi0.values, final.values) * config.grid.dx
        expected = -energy * trajectory.times[-1] / p.hbar
        phase_error = abs(np.angle(overlap * np.exp(-1j * expected)))
        ctx.report('global_phase_error', phase_error, 1e-6)
        ctx.report('density_stationarity',
                   float(np.max(np.abs(np.abs(final.values) ** 2 - np.abs(psi0.values) ** 2))),
                   1e-8)
    if _is_free_packet(config):
        ctx.report('width_law_relative_error',
                   _width_error(config, trajectory.states[-1].density(), trajectory.times[-1]),
                   1e-3)
    return {'steps': trajectory.n_steps, 'dt': trajectory.dt}


def run_compare(ctx):
    config = ctx.config
    p = config.params
    V = resolve_potential(config)
    floor = ctx.settings['DENSITY_FLOOR']
    rho0, phi0 = from_wavefunction(resolve_initial_state(config), floor)
    fields = evolve_coupled(rho0, phi0, V, p, config.t_final, config.snapshot_every)
    waves = evolve_schrodinger(to_wavefunction(rho0, phi0), V, p, config.t_final,
                               config.snapshot_every)

    rows, l2_values, velocity_values = [], [], []
    for t, rho_f, phi_f, psi in zip(fields.times, fields.densities, fields.phases, waves.states):
        rho_s, phi_s = from_wavefunction(psi, floor)
        l2 = compare_fields(rho_f, rho_s, 'L2')
        velocity = weighted_velocity_distance(rho_s, current_velocity(phi_f, p),
                                              current_velocity(phi_s, p))
        rows.append((t, compare_fields(rho_f, rho_s, 'L1'), l2,
                     compare_fields(rho_f, rho_s, 'sup'), velocity))
        l2_values.append(l2)
        velocity_values.append(velocity)
    ctx.csv('compare.csv', ['t', 'L1', 'L2', 'sup', 'velocity_distance'], rows)
    ctx.report('density_L2', max(l2_values), 1e-4)
    ctx.report('current_velocity_distance', max(velocity_values), 1e-3)
    return {'snapshots': len(rows), 'steps': fields.n_steps}


def run_measure(ctx):
    config = ctx.config
    p = config.params
    V = resolve_potential(config)
    rho, phi = from_wavefunction(resolve_initial_state(config), ctx.settings['DENSITY_FLOOR'])
    if config.t_final > 0:
        rho, phi = evolve_coupled(rho, phi, V, p, config.t_final, config.snapshot_every).final

    sites = int(config.option('sites', 64))
    setup = (SetupUnitary.fourier(sites) if config.option('setup', 'identity') == 'fourier'
             else SetupUnitary.identity(sites))
    amplifier_kind = config.option('amplifier', 'ideal')
    if amplifier_kind == 'ideal':
        amp = AmplifierModel.ideal(sites)
    else:
        amp = AmplifierModel.nearest_neighbour(sites, float(config.option('leak', 0.1)))

    count = int(config.option('count', 1000000))
    result = end_to_end_measurement(rho, phi, setup, amp, count, config.seed)
    counts = result.counts
    _, p_value, dof = chi_square_test(counts, result.probabilities)
    ctx.report('chi_square_p_value', p_value, 1e-3, bound='lower')

    prior = result.probabilities
    predictive = predictive_distribution(prior, amp)
    average = np.zeros_like(prior)
    for r in np.flatnonzero(predictive > 0):
        average += predictive[r] * amplify_posterior(prior, amp, int(r))
    ctx.report('bayes_coherence', float(np.max(np.abs(average - prior))), 1e-10)
    if amplifier_kind == 'ideal':
        defect = max((float(np.max(np.abs(post - np.eye(sites)[r])))
                      for r, post in result.posteriors.items()), default=0.0)
        ctx.report('ideal_posterior_defect', defect, 0.0)

    frequencies = counts / max(count, 1)
    ctx.csv('frequencies.csv', ['outcome', 'probability', 'count', 'frequency'],
            zip(range(sites), result.probabilities, counts, frequencies))
    ctx.json('measurement.json', {
        'setup': setup.to_dict(),
        'amplifier': dict(amp.to_dict(), kind=amplifier_kind),
        'counts': counts,
        'reading_counts': result.reading_counts(amp.n_readings),
        'posteriors': result.posteriors,
        'chi_square_dof': dof
    })
    return {'count': count, 'sites': sites, 'p_value': p_value}


def run_classical_limit(ctx):
    config = ctx.config
    grid = config.grid
    omega = float(config.potential.get('omega', 1.0))
    V = harmonic_potential(grid, config.params, omega)
    start = ClassicalState(float(config.option('x0', 1.0)), float(config.option('p0', 0.0)))
    classical = classical_trajectory(start, V, config.params, config.t_final)
    if classical.left_grid:
        raise DomainError('Classical trajectory leaves the grid; widen the domain')
    ctx.report('classical_energy_drift', classical.energy_drift(), 1e-10)
    ctx.csv('classical.csv', ['t', 'x', 'p', 'S'],
            zip(classical.times, classical.x, classical.p, classical.S))

    mass = config.params.mass
    workers = ctx.settings['ENSEMBLE_WORKERS']
    hbars = [float(h) for h in config.option('hbar_values', [1e-2, 1e-3, 1e-4])]
    rows, deviations = [], []
    for index, hbar in enumerate(hbars):
        p = PhysicalParams(mass, hbar, config.params.dt)
        sigma = coherent_width(p, omega)
        rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(index,)))
        ensemble = Ensemble(start.x + sigma * rng.standard_normal(config.ensemble_size),
                            config.seed + index)
        squared, worst_mean = [], 0.0
        for k in range(classical.times.size - 1):
            drift = VelocityField(grid, classical.p[k] / mass - omega * (grid.centers - classical.x[k]))
            ensemble = step_ensemble(ensemble, drift, p, Boundary.OPEN, workers)
            offset = ensemble.positions - classical.x[k + 1]
            squared.append(float(np.mean(offset ** 2)))
            worst_mean = max(worst_mean, abs(float(offset.mean())))
        msd = float(np.mean(squared))
        increments = np.concatenate([wiener_increments(config.seed, step, config.ensemble_size, p)
                                     for step in range(100)])
        variance_ratio = float(increments.var() / (p.diffusion * p.dt))
        ctx.report(f'fluctuation_variance_error[hbar={hbar:g}]', abs(variance_ratio - 1.0), 0.02)
        rows.append((hbar, msd, worst_mean, variance_ratio))
        deviations.append(msd)
    ctx.csv('limit.csv', ['hbar', 'mean_square_deviation', 'max_mean_error', 'variance_ratio'], rows)

    slope = float(np.polyfit(np.log(hbars), np.log(deviations), 1)[0])
    ctx.report('deviation_slope_error', abs(slope - 1.0), 0.1)
    return {'slope': slope, 'hbar_values': hbars}


RUNNERS = {
    'maxent-verify': run_maxent_verify,
    'ensemble': run_ensemble,
    'fields': run_fields,
    'schrodinger': run_schrodinger,
    'compare': run_compare,
    'measure': run_measure,
    'classical-limit': run_classical_limit,
}


def run(config, settings=None):
    """Execute the configured scenario and write its artifacts.

    Exit codes: 0 all comparisons pass, 1 a comparison failed, 2 configuration
    error, 3 numerical failure.
    """
    settings = dict(DEFAULT_SETTINGS, **(settings or {}))
    output_dir = config.output_dir or os.path.join(settings['RESULTS_DIR'], config.scenario)
    ctx = _Context(config, output_dir, settings)
    logger.info('running scenario %s into %s', config.scenario, output_dir)
    summary, error = {}, None
    try:
        summary = RUNNERS[config.scenario](ctx)
        exit_code = 0 if all_passed(ctx.reports) else 1
    except ConfigError as exc:
        logger.error('configuration error: %s', exc.message)
        error, exit_code = exc.to_dict(), exc.exit_code
    except LabError as exc:
        logger.error('numerical failure in %s: %s %s', config.scenario, exc.message,
                     exc.diagnostics)
        error, exit_code = exc.to_dict(), 3

    result = ScenarioResult(config.scenario, exit_code, ctx.reports, ctx.artifacts,
                            ctx.elapsed(), output_dir, error)
    payload = result.to_dict(timing=False)
    payload['summary'] = summary
    payload['config'] = {key: value for key, value in config.to_dict().items()
                         if key != 'output_dir'}
    ctx.json('report.json', payload)
    result.artifacts = ctx.artifacts
    return result
