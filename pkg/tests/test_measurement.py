import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy.stats import unitary_group

from entropic.errors import DomainError
from entropic.grid import Grid, PhysicalParams
from entropic.measurement import (
    AmplifierModel, ObservableSpec, SetupUnitary, StateVector, amplify_posterior,
    born_probabilities, chi_square_test, coarsen, end_to_end_measurement,
    free_energy_observable, measure_through_setup, momentum_observable,
    observable_expectation, predictive_distribution, sample_outcomes
)
from entropic.schrodinger_ref import from_wavefunction
from entropic.states import gaussian_packet, harmonic_eigenstate


def test_basis_state_has_a_certain_outcome():
    assert_array_equal(born_probabilities(StateVector.basis(4, 2)), [0, 0, 1, 0])


def test_equal_superposition_is_uniform():
    assert_allclose(born_probabilities(StateVector.normalized(np.ones(3))), [1 / 3] * 3)


def test_unnormalized_state_is_rejected():
    with pytest.raises(DomainError):
        StateVector([1.0, 1.0])


def test_setup_must_be_unitary():
    with pytest.raises(DomainError):
        SetupUnitary(np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_fourier_setup_spreads_a_site_state():
    setup = SetupUnitary.fourier(8)
    probabilities = measure_through_setup(StateVector.basis(8, 3), setup)

    assert_allclose(probabilities, 1 / 8, atol=1e-14)


def test_observable_setup_maps_eigenvectors_to_sites():
    rng = np.random.default_rng(3)
    vectors = unitary_group.rvs(5, random_state=rng)
    observable = ObservableSpec(np.arange(5.0), vectors)
    setup = observable.setup()

    for i in range(5):
        probabilities = measure_through_setup(StateVector(vectors[:, i]), setup)
        assert_allclose(probabilities, np.eye(5)[i], atol=1e-12)


def test_non_normal_operator_is_rejected():
    with pytest.raises(DomainError):
        ObservableSpec.from_operator(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_normal_operator_with_complex_eigenvalues():
    rng = np.random.default_rng(5)
    vectors = unitary_group.rvs(4, random_state=rng)
    eigenvalues = np.array([1 + 2j, -1j, 0.5, 3 - 1j])
    operator = vectors @ np.diag(eigenvalues) @ vectors.conj().T

    observable = ObservableSpec.from_operator(operator)

    assert observable.commutator_norm() < 1e-10
    assert_allclose(observable.operator(), operator, atol=1e-10)
    assert_allclose(np.sort_complex(observable.eigenvalues), np.sort_complex(eigenvalues),
                    atol=1e-10)
    psi = StateVector(vectors[:, 0])
    assert observable_expectation(observable, psi) == pytest.approx(1 + 2j)


def test_momentum_observable_measured_through_fourier_setup():
    n, spacing = 16, 0.5
    momentum = momentum_observable(n, spacing)
    x = spacing * np.arange(n)
    k = 2 * np.pi * 3 / (n * spacing)
    plane_wave = StateVector.normalized(np.exp(1j * k * x))

    probabilities = measure_through_setup(plane_wave, momentum.setup())

    assert_allclose(probabilities, np.eye(n)[3], atol=1e-12)
    assert observable_expectation(momentum, plane_wave).real == pytest.approx(k)
    assert_allclose(momentum.setup().matrix, SetupUnitary.fourier(n).matrix)


def test_free_energy_shares_the_momentum_setup():
    params = PhysicalParams(2.0, 1.0, 1e-3)
    energy = free_energy_observable(8, 1.0, params)
    momentum = momentum_observable(8, 1.0)

    assert_allclose(energy.eigenvectors, momentum.eigenvectors)
    assert_allclose(energy.eigenvalues, momentum.eigenvalues.real ** 2 / 4.0)


def test_sampled_outcomes_are_reproducible_and_pass_chi_square():
    probabilities = born_probabilities(
        SetupUnitary.fourier(64).apply(StateVector.normalized(np.exp(-np.linspace(-3, 3, 64) ** 2))))
    counts = sample_outcomes(probabilities, 200_000, seed=8)

    assert_array_equal(counts, sample_outcomes(probabilities, 200_000, seed=8))
    assert counts.sum() == 200_000
    _, p_value, dof = chi_square_test(counts, probabilities)
    assert p_value > 1e-3
    assert dof >= 1


def test_chi_square_detects_a_wrong_distribution():
    counts = sample_outcomes([0.5, 0.5], 10_000, seed=1)
    _, p_value, _ = chi_square_test(counts, [0.6, 0.4])

    assert p_value < 1e-6


def test_chi_square_with_impossible_outcome():
    statistic, p_value, _ = chi_square_test([5, 5, 1], [0.5, 0.5, 0.0])

    assert statistic == float('inf')
    assert p_value == 0.0


def test_ideal_amplifier_posterior_is_a_point_mass():
    prior = np.array([0.1, 0.2, 0.3, 0.4])
    amp = AmplifierModel.ideal(4)

    for reading in range(4):
        assert_array_equal(amplify_posterior(prior, amp, reading), np.eye(4)[reading])


def test_noisy_amplifier_posterior_is_bayes():
    prior = np.array([0.25, 0.25, 0.5])
    amp = AmplifierModel.nearest_neighbour(3, 0.1)
    posterior = amplify_posterior(prior, amp, 1)

    joint = prior * amp.likelihood[1]
    assert_allclose(posterior, joint / joint.sum())
    predictive = predictive_distribution(prior, amp)
    average = sum(predictive[r] * amplify_posterior(prior, amp, r) for r in range(3))
    assert_allclose(average, prior, atol=1e-14)


def test_reading_with_zero_evidence_is_rejected():
    with pytest.raises(DomainError):
        amplify_posterior(np.array([1.0, 0.0, 0.0]), AmplifierModel.ideal(3), 2)


def test_amplifier_columns_must_be_distributions():
    with pytest.raises(DomainError):
        AmplifierModel(np.array([[0.5, 0.5], [0.6, 0.5]]))
    with pytest.raises(DomainError):
        AmplifierModel.nearest_neighbour(4, 0.7)


def test_coarsen_needs_a_divisor():
    grid = Grid(-5.0, 5.0, 100)
    psi = gaussian_packet(grid, 0.0, 1.0)

    assert coarsen(psi, 10).dimension == 10
    with pytest.raises(DomainError):
        coarsen(psi, 7)


def test_end_to_end_measurement_of_the_ground_state():
    grid = Grid(-5.0, 5.0, 256)
    params = PhysicalParams(1.0, 1.0, 1e-3)
    psi, _ = harmonic_eigenstate(grid, params, 1.0)
    rho, phi = from_wavefunction(psi)
    amp = AmplifierModel.ideal(32)

    result = end_to_end_measurement(rho, phi, SetupUnitary.identity(32), amp, 100_000, seed=4)

    assert result.counts.sum() == 100_000
    assert_array_equal(result.readings, result.positions)
    assert_array_equal(result.reading_counts(32), result.counts)
    for reading, posterior in result.posteriors.items():
        assert_array_equal(posterior, np.eye(32)[reading])
    _, p_value, _ = chi_square_test(result.counts, result.probabilities)
    assert p_value > 1e-3

    again = end_to_end_measurement(rho, phi, SetupUnitary.identity(32), amp, 100_000, seed=4)
    assert_array_equal(again.positions, result.positions)


def test_noisy_readings_stay_near_the_site():
    grid = Grid(-5.0, 5.0, 256)
    rho, phi = from_wavefunction(gaussian_packet(grid, 0.0, 1.0))
    amp = AmplifierModel.nearest_neighbour(16, 0.2)

    result = end_to_end_measurement(rho, phi, SetupUnitary.identity(16), amp, 20_000, seed=2)

    assert np.all(np.abs(result.readings - result.positions) <= 1)
    assert 0.3 < np.mean(result.readings != result.positions) < 0.45


def test_fourier_measurement_of_a_moving_packet_peaks_at_its_momentum():
    grid = Grid(-8.0, 8.0, 256)
    rho, phi = from_wavefunction(gaussian_packet(grid, 0.0, 2.0, k=1.25))
    sites = 32
    amp = AmplifierModel.ideal(sites)

    result = end_to_end_measurement(rho, phi, SetupUnitary.fourier(sites), amp, 20_000, seed=8)

    momentum = momentum_observable(sites, grid.length / sites)
    nearest = int(np.argmin(np.abs(momentum.eigenvalues.real - 1.25)))
    assert int(np.argmax(result.probabilities)) == nearest
    assert int(np.argmax(result.counts)) == nearest
    assert momentum.eigenvalues[nearest].real == pytest.approx(2 * np.pi * 3 / 16)
