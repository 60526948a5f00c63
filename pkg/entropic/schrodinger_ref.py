"""Reference Schrödinger solver, the Ψ <-> (ρ, Φ) map and the classical limit.

The solver is Crank–Nicolson on the periodic grid with the same three-point
Laplacian used by the field dynamics, so the two descriptions can be compared
cell by cell.
"""
from dataclasses import dataclass, field
import logging
import math

import numpy as np
from scipy import sparse
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import splu

from .errors import DomainError, NumericalError
from .grid import DensityField, Grid, PhaseField, wrap_phase

logger = logging.getLogger(__name__)

NORM_TOLERANCE = 1e-10
DENSITY_FLOOR = 1e-12
NODE_PHASE_JUMP = 0.5 * np.pi


@dataclass(eq=False)
class WaveFunction:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        if values.shape != (self.grid.n_cells,):
            raise DomainError(f'Expected {self.grid.n_cells} amplitudes, got {values.shape}')
        if not np.all(np.isfinite(values)):
            raise DomainError('Amplitudes must be finite')
        self.values = values
        if abs(self.norm - 1.0) > NORM_TOLERANCE:
            raise DomainError(f'Wave function is not normalized: norm={self.norm!r}',
                              {'norm': self.norm})

    def __repr__(self):
        return f'<WaveFunction {self.grid!r} norm={self.norm:.15g}>'

    @property
    def norm(self):
        return float(np.sum(np.abs(self.values) ** 2) * self.grid.dx)

    @classmethod
    def normalized(cls, grid, values):
        values = np.asarray(values, dtype=complex)
        total = np.sum(np.abs(values) ** 2) * grid.dx
        if not total > 0:
            raise DomainError('Cannot normalize a vanishing wave function')
        return cls(grid, values / math.sqrt(total))

    def density(self):
        return DensityField(self.grid, np.abs(self.values) ** 2)

    def mean_momentum(self, params):
        """Expectation of the momentum, ħ Σ Im(Ψ* ∂Ψ) dx."""
        gradient = (np.roll(self.values, -1) - np.roll(self.values, 1)) / (2.0 * self.grid.dx)
        return float(params.hbar * np.sum(np.imag(np.conj(self.values) * gradient)) * self.grid.dx)


def to_wavefunction(rho, phi):
    """Ψ = ρ^{1/2} e^{iΦ}, cell by cell."""
    rho.grid.check_same(phi.grid)
    rho.check_valid()
    values = np.sqrt(rho.values) * np.exp(1j * phi.values)
    return WaveFunction.normalized(rho.grid, values)


def from_wavefunction(psi, floor=DENSITY_FLOOR):
    """Split Ψ into density and unwrapped phase.

    The phase is unwrapped from the leftmost cell above the density floor, with its
    value there kept in (-π, π]. Cells below the floor are flagged and bridged by
    linear interpolation. A neighbour pair whose phase jumps by more than π/2 with
    its weaker side at a minimum of |Ψ| straddles a node: both cells are flagged
    but keep their argument, so ``to_wavefunction`` rebuilds Ψ. Such jumps
    anywhere else mean the state is under-resolved and are only logged.
    """
    rho = np.abs(psi.values) ** 2
    peak = rho.max()
    if peak <= 0:
        raise DomainError('Wave function vanishes everywhere')
    angles = np.angle(psi.values)
    bridged = rho < floor * peak
    flags = bridged.copy()

    n = psi.grid.n_cells
    jumps = np.abs(wrap_phase(np.roll(angles, -1) - angles)) > NODE_PHASE_JUMP
    jumps[-1] = False
    amplitude = np.abs(psi.values)
    unresolved = 0
    for i in np.flatnonzero(jumps & ~bridged & ~np.roll(bridged, -1)):
        j = i + 1
        weaker, outer = (i, (i - 1) % n) if amplitude[i] <= amplitude[j] else (j, (j + 1) % n)
        if amplitude[weaker] < amplitude[outer]:
            # both central differences straddle the jump
            flags[i] = flags[j] = True
        else:
            unresolved += 1
    if unresolved:
        logger.warning('phase changes by more than pi/2 between %d neighbouring cells away '
                       'from any node; the state is under-resolved on this grid', unresolved)

    valid = np.flatnonzero(~bridged)
    if valid.size == 0:
        raise DomainError('No cell carries a well-defined phase')
    unwrapped = np.unwrap(angles[valid])
    if unwrapped[0] <= -np.pi:
        unwrapped = unwrapped + 2.0 * np.pi
    phase = np.interp(np.arange(n), valid, unwrapped)
    if flags.any():
        logger.warning('%d cells flagged as nodes or below the density floor', int(flags.sum()))
    return DensityField(psi.grid, rho), PhaseField(psi.grid, phase, flags)


def hamiltonian_matrix(grid, V, params):
    """Sparse periodic Hamiltonian -(ħ²/2m) D2 + V."""
    n = grid.n_cells
    laplacian = sparse.diags([np.ones(n - 1), -2.0 * np.ones(n), np.ones(n - 1)],
                             [-1, 0, 1], format='lil')
    laplacian[0, n - 1] = 1.0
    laplacian[n - 1, 0] = 1.0
    kinetic = -(params.hbar ** 2 / (2.0 * params.mass)) * laplacian.tocsr() / grid.dx ** 2
    return (kinetic + sparse.diags(V.values)).tocsc()


class CrankNicolsonPropagator:
    """One Crank–Nicolson step, (1 + iHdt/2ħ) Ψ' = (1 - iHdt/2ħ) Ψ, with a cached LU."""

    def __init__(self, grid, V, params, dt=None):
        grid.check_same(V.grid)
        self.grid = grid
        self.dt = params.dt if dt is None else dt
        if not self.dt > 0:
            raise DomainError(f'dt must be positive, got {self.dt}')
        H = hamiltonian_matrix(grid, V, params)
        identity = sparse.identity(grid.n_cells, dtype=complex, format='csc')
        factor = 1j * self.dt / (2.0 * params.hbar)
        try:
            self._lu = splu((identity + factor * H).tocsc())
        except RuntimeError as exc:
            raise NumericalError(f'Crank-Nicolson factorization failed: {exc}') from exc
        self._explicit = (identity - factor * H).tocsr()

    def __repr__(self):
        return f'<CrankNicolsonPropagator {self.grid!r} dt={self.dt}>'

    def step_values(self, values):
        result = self._lu.solve(self._explicit @ values)
        if not np.all(np.isfinite(result)):
            raise NumericalError('Crank-Nicolson solve produced non-finite amplitudes')
        return result

    def step(self, psi):
        return WaveFunction(psi.grid, self.step_values(psi.values))


def se_step(psi, V, p, dt=None):
    """Advance Ψ by one norm-preserving Crank–Nicolson step."""
    return CrankNicolsonPropagator(psi.grid, V, p, dt).step(psi)


@dataclass
class SchrodingerTrajectory:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    norms: list = field(default_factory=list)
    n_steps: int = 0
    dt: float = 0.0

    def norm_drift(self):
        return max(abs(n - self.norms[0]) for n in self.norms)


def time_grid(t_final, dt):
    """Number of steps and the adjusted step that lands exactly on ``t_final``."""
    if not (t_final > 0 and dt > 0):
        raise DomainError('t_final and dt must be positive')
    n_steps = max(1, int(math.ceil(t_final / dt - 1e-9)))
    return n_steps, t_final / n_steps


def evolve_schrodinger(psi, V, p, t_final, snapshot_every=100):
    n_steps, dt = time_grid(t_final, p.dt)
    propagator = CrankNicolsonPropagator(psi.grid, V, p, dt)
    trajectory = SchrodingerTrajectory(n_steps=n_steps, dt=dt)
    values = psi.values.copy()

    def record(step):
        trajectory.times.append(step * dt)
        trajectory.states.append(WaveFunction(psi.grid, values))
        trajectory.norms.append(float(np.sum(np.abs(values) ** 2) * psi.grid.dx))

    record(0)
    for step in range(1, n_steps + 1):
        values = propagator.step_values(values)
        if step % snapshot_every == 0 or step == n_steps:
            record(step)
    logger.info('Schrodinger run: %d steps of dt=%.3g, norm drift %.3e',
                n_steps, dt, trajectory.norm_drift())
    return trajectory


def probability_current(psi, p):
    """Discrete current (ħ/m) Im(Ψ_i* Ψ_{i+1})/dx averaged back to cell centres."""
    face = p.hbar / p.mass * np.imag(np.conj(psi.values) * np.roll(psi.values, -1)) / psi.grid.dx
    return 0.5 * (face + np.roll(face, 1))


def time_reversal_defect(psi, V, p, n_steps):
    """Sup-norm distance to Ψ after evolving, conjugating, evolving and conjugating."""
    propagator = CrankNicolsonPropagator(psi.grid, V, p)
    values = psi.values.copy()
    for _ in range(n_steps):
        values = propagator.step_values(values)
    values = np.conj(values)
    for _ in range(n_steps):
        values = propagator.step_values(values)
    return float(np.max(np.abs(np.conj(values) - psi.values)))


# Classical limit

@dataclass(frozen=True)
class ClassicalState:
    x: float
    p: float
    S: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.p, self.S)):
            raise DomainError('Classical state must be finite')

    def energy(self, potential, mass):
        return self.p ** 2 / (2.0 * mass) + float(potential(self.x))


@dataclass
class ClassicalTrajectory:
    times: np.ndarray
    x: np.ndarray
    p: np.ndarray
    S: np.ndarray
    energies: np.ndarray
    left_grid: bool = False

    def energy_drift(self):
        return float(np.max(np.abs(self.energies - self.energies[0])))


def potential_model(V):
    """Smooth interpolant of a sampled potential (exact for cubic polynomials)."""
    return CubicSpline(V.grid.centers, V.values)


# Forest–Ruth fourth-order drift/kick coefficients
_CBRT2 = 2.0 ** (1.0 / 3.0)
_FR = 1.0 / (2.0 - _CBRT2)
_DRIFTS = (0.5 * _FR, 0.5 * (1.0 - _CBRT2) * _FR, 0.5 * (1.0 - _CBRT2) * _FR, 0.5 * _FR)
_KICKS = (_FR, -_CBRT2 * _FR, _FR)


def classical_trajectory(s0, V, p, t_final, dt=None):
    """Characteristics of the classical Hamilton–Jacobi equation.

    Integrates dx/dt = p/m, dp/dt = -V'(x) with a fourth-order symplectic
    drift–kick sequence; the action accumulates the Lagrangian along the path.
    A trajectory that leaves the grid is truncated and flagged.
    """
    potential = potential_model(V)
    force = potential.derivative()
    grid = V.grid
    n_steps, dt = time_grid(t_final, p.dt if dt is None else dt)

    x, mom, action = s0.x, s0.p, s0.S
    xs, ps, ss = [x], [mom], [action]
    left_grid = False
    lagrangian = mom ** 2 / (2.0 * p.mass) - float(potential(x))
    for _ in range(n_steps):
        for i, drift in enumerate(_DRIFTS):
            x += dt * drift * mom / p.mass
            if i < len(_KICKS):
                mom -= dt * _KICKS[i] * float(force(x))
        if not grid.x_min <= x <= grid.x_max:
            left_grid = True
            logger.warning('classical trajectory left the grid at x=%g', x)
            break
        new_lagrangian = mom ** 2 / (2.0 * p.mass) - float(potential(x))
        action += 0.5 * dt * (lagrangian + new_lagrangian)
        lagrangian = new_lagrangian
        xs.append(x)
        ps.append(mom)
        ss.append(action)

    xs, ps = np.array(xs), np.array(ps)
    energies = ps ** 2 / (2.0 * p.mass) + potential(xs)
    times = dt * np.arange(xs.size)
    return ClassicalTrajectory(times, xs, ps, np.array(ss), energies, left_grid)
