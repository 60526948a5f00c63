import logging
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from entropic.errors import DomainError
from entropic.grid import DensityField, Grid, PhaseField, PhysicalParams, PotentialField
from entropic.schrodinger_ref import (
    ClassicalState, CrankNicolsonPropagator, WaveFunction, classical_trajectory,
    evolve_schrodinger, from_wavefunction, probability_current, se_step, time_grid,
    time_reversal_defect, to_wavefunction
)
from entropic.states import (
    free_packet_variance, gaussian_packet, harmonic_eigenfunction, harmonic_eigenstate,
    harmonic_potential, snap_wavenumber
)


@pytest.fixture
def box():
    return Grid(-7.0, 7.0, 280)


def test_wavefunction_must_be_normalized(box):
    with pytest.raises(DomainError):
        WaveFunction(box, np.ones(box.n_cells))
    psi = WaveFunction.normalized(box, np.ones(box.n_cells))
    assert psi.norm == pytest.approx(1.0)


def test_density_phase_round_trip(box):
    psi = gaussian_packet(box, 0.5, 1.0, k=2.0)
    rho, phi = from_wavefunction(psi)
    back = to_wavefunction(rho, phi)

    assert_allclose(back.values, psi.values, atol=1e-12)
    assert not phi.flags.any()


def test_unwrapped_phase_is_continuous(box):
    k = snap_wavenumber(box, 3.0)
    psi = gaussian_packet(box, 0.0, 1.5, k=k)
    _, phi = from_wavefunction(psi)

    assert -np.pi < phi.values[0] <= np.pi
    assert np.max(np.abs(np.diff(phi.values))) < np.pi / 2
    assert_allclose(np.diff(phi.values), k * box.dx, atol=1e-9)


def test_nodes_are_flagged_and_keep_their_argument(box):
    p = PhysicalParams(1.0, 1.0, 1e-3)
    psi, _ = harmonic_eigenstate(box, p, 1.0, n=1)
    rho, phi = from_wavefunction(psi)

    centre = np.argsort(np.abs(box.centers))[:2]
    assert phi.flags[centre].all()
    assert np.all(np.isfinite(phi.values))
    assert abs(phi.values[centre[0]] - phi.values[centre[1]]) == pytest.approx(np.pi, abs=1e-9)

    above_floor = rho.values >= 1e-12 * rho.values.max()
    back = to_wavefunction(rho, phi)
    assert_allclose(back.values[above_floor], psi.values[above_floor], atol=1e-12)


def test_fast_phase_without_a_node_is_not_flagged(box, caplog):
    k = snap_wavenumber(box, 40.0)
    assert k * box.dx > np.pi / 2
    psi = gaussian_packet(box, 0.0, 1.0, k=k)

    with caplog.at_level(logging.WARNING, logger='entropic.schrodinger_ref'):
        _, phi = from_wavefunction(psi)

    assert not phi.flags[np.abs(box.centers) < 5.0].any()
    assert 'under-resolved' in caplog.text


def test_snapped_wavenumber_fits_the_box(box):
    k = snap_wavenumber(box, 1.0)
    assert (k * box.length / (2 * np.pi)) == pytest.approx(round(k * box.length / (2 * np.pi)))


def test_crank_nicolson_preserves_norm(box):
    p = PhysicalParams(1.0, 1.0, 1e-2)
    V = harmonic_potential(box, p, 0.5)
    propagator = CrankNicolsonPropagator(box, V, p)
    psi = gaussian_packet(box, 1.0, 0.8, k=1.0)
    for _ in range(1000):
        psi = propagator.step(psi)

    assert psi.norm == pytest.approx(1.0, abs=1e-12)


def test_se_step_matches_propagator(box):
    p = PhysicalParams(1.0, 1.0, 1e-3)
    V = PotentialField.zeros(box)
    psi = gaussian_packet(box, 0.0, 1.0)

    assert_allclose(se_step(psi, V, p).values,
                    CrankNicolsonPropagator(box, V, p).step(psi).values)


def test_time_grid_lands_on_final_time():
    n_steps, dt = time_grid(1.0, 0.3)
    assert n_steps == 4
    assert n_steps * dt == pytest.approx(1.0)
    with pytest.raises(DomainError):
        time_grid(-1.0, 0.1)


def test_free_packet_width_law(box):
    p = PhysicalParams(1.0, 1.0, 1e-3)
    trajectory = evolve_schrodinger(gaussian_packet(box, 0.0, 1.0), PotentialField.zeros(box),
                                    p, 1.0, snapshot_every=250)
    final = trajectory.states[-1].density()

    assert len(trajectory.states) == 5
    assert trajectory.times[-1] == pytest.approx(1.0)
    assert final.variance() == pytest.approx(free_packet_variance(1.0, 1.0, p), rel=1e-3)
    assert trajectory.norm_drift() < 1e-9


def test_moving_packet_carries_its_momentum(box):
    p = PhysicalParams(1.0, 1.0, 1e-3)
    k = snap_wavenumber(box, 1.0)
    psi = gaussian_packet(box, -1.0, 1.0, k=k)
    trajectory = evolve_schrodinger(psi, PotentialField.zeros(box), p, 1.0, snapshot_every=1000)

    assert psi.mean_momentum(p) == pytest.approx(k, rel=1e-3)
    assert trajectory.states[-1].density().mean() == pytest.approx(-1.0 + k, rel=1e-2)
    current = probability_current(psi, p)
    assert np.sum(current) * box.dx == pytest.approx(psi.mean_momentum(p) / p.mass, rel=1e-3)


def test_ground_state_only_gains_a_global_phase(box):
    p = PhysicalParams(1.0, 1.0, 1e-3)
    psi, energy = harmonic_eigenstate(box, p, 1.0)
    V = harmonic_potential(box, p, 1.0)
    trajectory = evolve_schrodinger(psi, V, p, 0.5, snapshot_every=500)
    final = trajectory.states[-1]

    assert energy == pytest.approx(0.5, rel=1e-3)
    assert_allclose(np.abs(final.values) ** 2, np.abs(psi.values) ** 2, atol=1e-10)
    overlap = np.vdot(psi.values, final.values) * box.dx
    assert abs(overlap) == pytest.approx(1.0, abs=1e-10)


def test_discrete_eigenstate_is_close_to_analytic(box):
    p = PhysicalParams(1.0, 1.0, 1e-3)
    psi, _ = harmonic_eigenstate(box, p, 1.0, n=2)
    analytic = harmonic_eigenfunction(box.centers, 2, p, 1.0)

    assert np.max(np.abs(psi.values.real - analytic)) < 1e-2


def test_time_reversal_returns_to_start(box):
    p = PhysicalParams(1.0, 1.0, 1e-2)
    V = harmonic_potential(box, p, 0.7)
    psi = gaussian_packet(box, 0.5, 0.9, k=snap_wavenumber(box, 1.5))

    assert time_reversal_defect(psi, V, p, 100) < 1e-10


def test_density_phase_map_validates_density(box):
    rho = DensityField(box, np.full(box.n_cells, 2.0 / box.length))
    with pytest.raises(DomainError):
        to_wavefunction(rho, PhaseField.zeros(box))


def test_classical_oscillator_is_periodic_and_conserves_energy():
    grid = Grid(-3.0, 3.0, 600)
    p = PhysicalParams(1.0, 1.0, 1e-3)
    V = harmonic_potential(grid, p, 1.0)
    trajectory = classical_trajectory(ClassicalState(1.0, 0.0), V, p, 2.0 * math.pi)

    assert not trajectory.left_grid
    assert trajectory.energy_drift() < 1e-10
    assert trajectory.x[-1] == pytest.approx(1.0, abs=1e-9)
    assert trajectory.p[-1] == pytest.approx(0.0, abs=1e-9)
    half = trajectory.times.size // 2
    assert trajectory.x[half] == pytest.approx(-1.0, abs=1e-6)
    # the action over a full period is ∫L dt = 0 for the harmonic oscillator
    assert trajectory.S[-1] == pytest.approx(0.0, abs=1e-6)


def test_classical_trajectory_is_truncated_at_the_edge():
    grid = Grid(-2.0, 2.0, 200)
    p = PhysicalParams(1.0, 1.0, 1e-2)
    V = PotentialField.zeros(grid)
    trajectory = classical_trajectory(ClassicalState(0.0, 1.0), V, p, 5.0)

    assert trajectory.left_grid
    assert trajectory.x[-1] <= 2.0
    assert trajectory.times[-1] == pytest.approx(2.0, abs=0.02)
    assert ClassicalState(0.0, 2.0).energy(lambda x: 0.0, 1.0) == pytest.approx(2.0)
