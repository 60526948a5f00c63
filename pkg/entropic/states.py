"""Potentials and initial states used by the scenarios and the tests."""
import logging
import math

import numpy as np
from scipy.linalg import eigh
from scipy.special import eval_hermite

from .errors import DomainError
from .grid import PotentialField
from .schrodinger_ref import WaveFunction, hamiltonian_matrix

logger = logging.getLogger(__name__)

IMAGES = 2


def harmonic_potential(grid, params, omega, center=0.0):
    if not omega > 0:
        raise DomainError(f'omega must be positive, got {omega}')
    return PotentialField(grid, 0.5 * params.mass * omega ** 2 * (grid.centers - center) ** 2)


def tabulated_potential(grid, values):
    return PotentialField(grid, np.asarray(values, dtype=float))


def snap_wavenumber(grid, k):
    """Nearest wavenumber 2πj/L compatible with the periodic grid."""
    quantum = 2.0 * np.pi / grid.length
    return quantum * round(k / quantum)


def gaussian_packet(grid, mu, sigma, k=0.0):
    """Periodized Gaussian packet with position variance σ² and wavenumber k.

    Images at ±L, ±2L are summed so the packet is smooth across the wrap;
    k is snapped to the grid's wavenumber lattice.
    """
    if not sigma > 0:
        raise DomainError(f'sigma must be positive, got {sigma}')
    k_snapped = snap_wavenumber(grid, k)
    if k_snapped != k:
        logger.info('wavenumber %g snapped to %g', k, k_snapped)
    x = grid.centers
    values = np.zeros(grid.n_cells, dtype=complex)
    for image in range(-IMAGES, IMAGES + 1):
        shifted = x + image * grid.length
        values += np.exp(-(shifted - mu) ** 2 / (4.0 * sigma ** 2) + 1j * k_snapped * shifted)
    return WaveFunction.normalized(grid, values)


def free_packet_variance(sigma0, t, params):
    """σ²(t) = σ0² + (ħt / 2mσ0)² for a free Gaussian packet."""
    return sigma0 ** 2 + (params.hbar * t / (2.0 * params.mass * sigma0)) ** 2


def coherent_width(params, omega):
    """Position standard deviation of the harmonic ground state."""
    return math.sqrt(params.hbar / (2.0 * params.mass * omega))


def harmonic_eigenfunction(x, n, params, omega):
    """Analytic n-th eigenfunction of the harmonic oscillator."""
    scale = params.mass * omega / params.hbar
    xi = math.sqrt(scale) * np.asarray(x)
    norm = (scale / np.pi) ** 0.25 / math.sqrt(2.0 ** n * math.factorial(n))
    return norm * eval_hermite(n, xi) * np.exp(-0.5 * xi ** 2)


def harmonic_eigenstate(grid, params, omega, n=0):
    """n-th eigenvector of the discrete periodic Hamiltonian with harmonic potential.

    Stationary under both solvers; the sign is fixed to match the analytic
    eigenfunction.
    """
    if n < 0:
        raise DomainError(f'eigenstate index must be non-negative, got {n}')
    V = harmonic_potential(grid, params, omega)
    H = hamiltonian_matrix(grid, V, params).toarray().real
    energies, vectors = eigh(H, subset_by_index=[n, n])
    values = vectors[:, 0] / math.sqrt(grid.dx)
    reference = harmonic_eigenfunction(grid.centers, n, params, omega)
    if np.dot(values, reference) < 0:
        values = -values
    logger.debug('discrete eigenstate %d energy %.12g (analytic %.12g)',
                 n, energies[0], params.hbar * omega * (n + 0.5))
    return WaveFunction.normalized(grid, values.astype(complex)), float(energies[0])
