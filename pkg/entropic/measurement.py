"""Position measurements on a lattice, unitary setups and Bayesian amplification.

Every measurement is a position measurement: a setup unitary maps the
eigenvectors of the measured observable onto lattice sites, the Born rule
assigns the site probabilities, and an amplifier turns the site into a pointer
reading through a likelihood that Bayes' rule inverts.
"""
from dataclasses import dataclass, field
import logging

import numpy as np
from scipy.linalg import dft, schur
from scipy.stats import chisquare

from .errors import DomainError
from .schrodinger_ref import to_wavefunction

logger = logging.getLogger(__name__)

NORM_TOLERANCE = 1e-12
UNITARY_TOLERANCE = 1e-10
COMMUTATOR_TOLERANCE = 1e-10
MIN_EXPECTED_COUNT = 5.0


@dataclass(eq=False)
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self):
        c = np.array(self.amplitudes, dtype=complex).ravel()
        if c.size < 1 or not np.all(np.isfinite(c)):
            raise DomainError('State amplitudes must be finite and non-empty')
        norm = float(np.sum(np.abs(c) ** 2))
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise DomainError(f'State is not normalized: norm={norm!r}', {'norm': norm})
        self.amplitudes = c

    def __repr__(self):
        return f'<StateVector n={self.dimension}>'

    @property
    def dimension(self):
        return self.amplitudes.size

    @classmethod
    def normalized(cls, amplitudes):
        c = np.asarray(amplitudes, dtype=complex)
        norm = np.linalg.norm(c)
        if not norm > 0:
            raise DomainError('Cannot normalize a zero vector')
        return cls(c / norm)

    @classmethod
    def basis(cls, n, index):
        c = np.zeros(n, dtype=complex)
        c[index] = 1.0
        return cls(c)


def _check_unitary(matrix, what):
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DomainError(f'{what} must be a square matrix, got shape {matrix.shape}')
    defect = float(np.max(np.abs(matrix.conj().T @ matrix - np.eye(matrix.shape[0]))))
    if defect > UNITARY_TOLERANCE:
        raise DomainError(f'{what} is not unitary', {'defect': defect})
    return matrix


@dataclass(eq=False)
class SetupUnitary:
    """Apparatus evolution; column ``i`` of its adjoint is the state detected at site ``i``."""
    matrix: np.ndarray
    name: str = 'custom'

    def __post_init__(self):
        self.matrix = _check_unitary(self.matrix, 'Setup')

    def __repr__(self):
        return f'<SetupUnitary {self.name} n={self.dimension}>'

    @property
    def dimension(self):
        return self.matrix.shape[0]

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n, dtype=complex), 'identity')

    @classmethod
    def fourier(cls, n):
        return cls(dft(n, scale='sqrtn'), 'fourier')

    def apply(self, psi):
        if psi.dimension != self.dimension:
            raise DomainError(f'State of dimension {psi.dimension} does not fit a '
                              f'{self.dimension}-site setup')
        return StateVector(self.matrix @ psi.amplitudes)

    def to_dict(self):
        return {'name': self.name, 'dimension': self.dimension}


@dataclass(eq=False)
class ObservableSpec:
    """A = Σ λ_i |s_i><s_i| with orthonormal |s_i>; λ may be complex."""
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=complex).ravel()
        try:
            self.eigenvectors = _check_unitary(self.eigenvectors, 'Eigenvector matrix')
        except DomainError as exc:
            raise DomainError('Observable eigenvectors are not orthonormal',
                              exc.diagnostics) from exc
        if self.eigenvalues.size != self.eigenvectors.shape[0]:
            raise DomainError('One eigenvalue per eigenvector is required')

    def __repr__(self):
        return f'<ObservableSpec n={self.dimension}>'

    @property
    def dimension(self):
        return self.eigenvalues.size

    def operator(self):
        S = self.eigenvectors
        return S @ np.diag(self.eigenvalues) @ S.conj().T

    def setup(self):
        """The unitary mapping each eigenvector |s_i> onto site i."""
        return SetupUnitary(self.eigenvectors.conj().T, 'observable')

    def commutator_norm(self):
        return hermitian_commutator_norm(self.operator())

    @classmethod
    def from_operator(cls, operator):
        """Diagonalize a normal operator; reject one whose Hermitian parts do not commute."""
        A = np.asarray(operator, dtype=complex)
        scale = max(1.0, float(np.max(np.abs(A))) ** 2)
        defect = hermitian_commutator_norm(A)
        if defect > COMMUTATOR_TOLERANCE * scale:
            raise DomainError('Hermitian and anti-Hermitian parts do not commute; '
                              'no position measurement realizes this operator',
                              {'commutator_norm': defect})
        T, Z = schur(A, output='complex')
        return cls(np.diag(T), Z)


def hermitian_commutator_norm(A):
    """max |[H, K]| for A = H + iK with H, K Hermitian."""
    A = np.asarray(A, dtype=complex)
    H = 0.5 * (A + A.conj().T)
    K = 0.5j * (A.conj().T - A)
    return float(np.max(np.abs(H @ K - K @ H)))


def momentum_observable(n, spacing, hbar=1.0):
    """Lattice momentum: plane-wave eigenvectors, measured by the Fourier setup."""
    eigenvectors = dft(n, scale='sqrtn').conj().T
    return ObservableSpec(hbar * 2.0 * np.pi * np.fft.fftfreq(n, d=spacing), eigenvectors)


def free_energy_observable(n, spacing, params):
    """H = p²/2m of a free particle; shares the momentum eigenvectors and setup."""
    momentum = momentum_observable(n, spacing, params.hbar)
    return ObservableSpec(momentum.eigenvalues.real ** 2 / (2.0 * params.mass),
                          momentum.eigenvectors)


def _as_state(psi):
    return psi if isinstance(psi, StateVector) else StateVector(psi)


def born_probabilities(psi):
    """p_i = |c_i|²."""
    psi = _as_state(psi)
    return np.abs(psi.amplitudes) ** 2


def measure_through_setup(psi, setup):
    return born_probabilities(setup.apply(_as_state(psi)))


def _check_distribution(p):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise DomainError('Not a probability vector')
    return p / p.sum()


def sample_outcomes(p, count, seed):
    """Multinomial outcome counts, reproducible by seed."""
    p = _check_distribution(p)
    if count < 0:
        raise DomainError(f'count must be non-negative, got {count}')
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    return rng.multinomial(int(count), p)


def observable_expectation(obs, psi):
    """Σ λ_i |<s_i|Ψ>|²."""
    psi = _as_state(psi)
    if psi.dimension != obs.dimension:
        raise DomainError('Observable and state dimensions differ')
    weights = np.abs(obs.eigenvectors.conj().T @ psi.amplitudes) ** 2
    return complex(np.sum(obs.eigenvalues * weights))


@dataclass(eq=False)
class AmplifierModel:
    """Likelihood P(reading r | site i): rows are readings, columns are sites."""
    likelihood: np.ndarray

    def __post_init__(self):
        L = np.array(self.likelihood, dtype=float)
        if L.ndim != 2:
            raise DomainError('Likelihood must be a matrix')
        if np.any(L < 0):
            raise DomainError('Likelihood entries must be non-negative')
        deviation = float(np.max(np.abs(L.sum(axis=0) - 1.0)))
        if deviation > NORM_TOLERANCE:
            raise DomainError('Likelihood columns must sum to one', {'deviation': deviation})
        self.likelihood = L

    def __repr__(self):
        return f'<AmplifierModel readings={self.n_readings} sites={self.n_sites}>'

    @property
    def n_readings(self):
        return self.likelihood.shape[0]

    @property
    def n_sites(self):
        return self.likelihood.shape[1]

    @classmethod
    def ideal(cls, n):
        return cls(np.eye(n))

    @classmethod
    def nearest_neighbour(cls, n, leak):
        """Reading equals the site, except a ``leak`` probability to each neighbour."""
        if not 0.0 <= leak <= 0.5:
            raise DomainError(f'leak must lie in [0, 0.5], got {leak}')
        L = np.zeros((n, n))
        for i in range(n):
            neighbours = [j for j in (i - 1, i + 1) if 0 <= j < n]
            for j in neighbours:
                L[j, i] = leak
            L[i, i] = 1.0 - leak * len(neighbours)
        return cls(L)

    def to_dict(self):
        return {'readings': self.n_readings, 'sites': self.n_sites}


def predictive_distribution(prior, amp):
    """P(r) = Σ_i P(r|i) P(i)."""
    prior = _check_distribution(prior)
    if prior.size != amp.n_sites:
        raise DomainError('Prior and amplifier dimensions differ')
    return amp.likelihood @ prior


def amplify_posterior(prior, amp, observed):
    """P(i|r) = P(i) P(r|i) / P(r)."""
    prior = _check_distribution(prior)
    if prior.size != amp.n_sites:
        raise DomainError('Prior and amplifier dimensions differ')
    if not 0 <= observed < amp.n_readings:
        raise DomainError(f'Reading {observed} is not an amplifier outcome')
    joint = prior * amp.likelihood[observed]
    evidence = float(joint.sum())
    if evidence <= 0:
        raise DomainError(f'Reading {observed} has zero evidence under the prior')
    return joint / evidence


def chi_square_test(counts, probabilities, min_expected=MIN_EXPECTED_COUNT):
    """Pearson test of counts against probabilities; bins expecting fewer than
    ``min_expected`` counts are pooled. Returns ``(statistic, p_value, dof)``."""
    counts = np.asarray(counts, dtype=float)
    probabilities = _check_distribution(probabilities)
    total = counts.sum()
    expected = probabilities * total
    impossible = (expected == 0) & (counts > 0)
    if impossible.any():
        return float('inf'), 0.0, int(np.count_nonzero(expected)) - 1
    small = expected < min_expected
    observed_bins = list(counts[~small])
    expected_bins = list(expected[~small])
    if small.any() and expected[small].sum() > 0:
        observed_bins.append(counts[small].sum())
        expected_bins.append(expected[small].sum())
    if len(expected_bins) < 2:
        return 0.0, 1.0, 0
    result = chisquare(observed_bins, expected_bins)
    return float(result.statistic), float(result.pvalue), len(expected_bins) - 1


def coarsen(psi, n):
    """Block-average a grid wave function onto ``n`` lattice sites and renormalize."""
    cells = psi.grid.n_cells
    if n < 1 or cells % n:
        raise DomainError(f'{cells} grid cells cannot be coarsened onto {n} sites')
    blocks = psi.values.reshape(n, cells // n).mean(axis=1)
    return StateVector.normalized(blocks)


@dataclass
class MeasurementResult:
    state: StateVector
    probabilities: np.ndarray
    positions: np.ndarray
    readings: np.ndarray
    posteriors: dict = field(default_factory=dict)

    @property
    def counts(self):
        return np.bincount(self.positions, minlength=self.probabilities.size)

    def reading_counts(self, n_readings):
        return np.bincount(self.readings, minlength=n_readings)


def end_to_end_measurement(rho, phi, setup, amp, count, seed):
    """Coarsen (ρ, Φ), measure through ``setup``, amplify and infer the site per reading."""
    state = coarsen(to_wavefunction(rho, phi), setup.dimension)
    if amp.n_sites != setup.dimension:
        raise DomainError('Amplifier and setup dimensions differ')
    probabilities = measure_through_setup(state, setup)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    positions = rng.choice(setup.dimension, size=int(count), p=_check_distribution(probabilities))
    cumulative = np.cumsum(amp.likelihood, axis=0)
    draws = rng.random(int(count))
    readings = np.empty(int(count), dtype=int)
    for site in np.unique(positions):
        chosen = positions == site
        readings[chosen] = np.searchsorted(cumulative[:, site], draws[chosen], side='right')
    readings = np.minimum(readings, amp.n_readings - 1)
    posteriors = {int(r): amplify_posterior(probabilities, amp, int(r))
                  for r in np.unique(readings)}
    logger.info('measured %d outcomes through the %s setup', int(count), setup.name)
    return MeasurementResult(state, probabilities, positions.astype(int),
                             readings.astype(int), posteriors)
