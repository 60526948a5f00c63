"""Particle ensembles and grid densities under the entropic-time update.

A particle moves by ``dx = b(x) dt + dw`` with ``dw ~ Normal(0, (hbar/m) dt)``.
The same step law, written as a column-stochastic matrix over grid cells,
propagates densities, and Bayes' theorem turns it into the reverse kernel.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import enum
import logging
import math

import numpy as np

from .errors import BoundaryError, DomainError
from .grid import DensityField, Grid, VelocityField
from .maxent_kernel import build_kernel, constraint_for

logger = logging.getLogger(__name__)

BLOCK_SIZE = 4096
BOUNDARY_TOLERANCE = 1e-6
CONSISTENCY_TOLERANCE = 1e-6
IMAGES = 3


class Boundary(enum.Enum):
    PERIODIC = 'periodic'
    REFLECTING = 'reflecting'
    OPEN = 'open'


@dataclass(eq=False)
class Ensemble:
    positions: np.ndarray
    seed: int
    time: float = 0.0
    step: int = 0

    def __post_init__(self):
        positions = np.array(self.positions, dtype=float).ravel()
        if positions.size < 1:
            raise DomainError('An ensemble needs at least one particle')
        if not np.all(np.isfinite(positions)):
            raise DomainError('Particle positions must be finite')
        if int(self.seed) != self.seed or self.seed < 0:
            raise DomainError(f'seed must be a non-negative integer, got {self.seed!r}')
        self.positions = positions
        self.seed = int(self.seed)

    def __repr__(self):
        return f'<Ensemble N={self.size} t={self.time:.6g} step={self.step}>'

    @property
    def size(self):
        return self.positions.size

    def count_outside(self, grid):
        return int(np.count_nonzero(~grid.contains(self.positions)))


def sample_ensemble(density, n, seed):
    """Draw ``n`` positions from a grid density, uniformly within each cell."""
    if n < 1:
        raise DomainError(f'n must be at least 1, got {n}')
    density.check_valid()
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    grid = density.grid
    masses = density.masses / density.masses.sum()
    cells = rng.choice(grid.n_cells, size=int(n), p=masses)
    positions = grid.edges[cells] + rng.random(int(n)) * grid.dx
    return Ensemble(positions, seed)


def _block_noise(seed, step, block, size, params):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(step, block)))
    return math.sqrt(params.diffusion * params.dt) * rng.standard_normal(size)


def wiener_increments(seed, step, n, params):
    """Fluctuations for particles ``0..n-1`` at ``step``.

    Particle ``i`` draws from the stream keyed by ``(seed, step, i // BLOCK_SIZE)``,
    so the values never depend on how the blocks are scheduled.
    """
    blocks = range(0, int(n), BLOCK_SIZE)
    return np.concatenate([
        _block_noise(seed, step, start // BLOCK_SIZE, min(BLOCK_SIZE, n - start), params)
        for start in blocks
    ])


def interpolate_drift(drift, x, boundary=Boundary.PERIODIC):
    """Linear interpolation of a cell-centred drift at particle positions."""
    grid = drift.grid
    if boundary is Boundary.PERIODIC:
        return np.interp(x, grid.centers, drift.values, period=grid.length)
    return np.interp(x, grid.centers, drift.values)


def apply_boundary(grid, x, boundary):
    if boundary is Boundary.PERIODIC:
        return grid.wrap(x)
    if boundary is Boundary.REFLECTING:
        return grid.reflect(x)
    return x


def _advance_block(args):
    positions, drift, boundary, params, seed, step, block = args
    noise = _block_noise(seed, step, block, positions.size, params)
    moved = positions + interpolate_drift(drift, positions, boundary) * params.dt + noise
    return apply_boundary(drift.grid, moved, boundary)


def step_ensemble(e, drift_field, p, boundary=Boundary.PERIODIC, workers=1):
    """One Euler–Maruyama step of every particle; ``workers`` only changes scheduling."""
    tasks = [
        (e.positions[start:start + BLOCK_SIZE], drift_field, boundary, p,
         e.seed, e.step, start // BLOCK_SIZE)
        for start in range(0, e.size, BLOCK_SIZE)
    ]
    if workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            moved = list(executor.map(_advance_block, tasks))
    else:
        moved = [_advance_block(task) for task in tasks]
    return Ensemble(np.concatenate(moved), e.seed, e.time + p.dt, e.step + 1)


def run_ensemble(e, drift_field, p, n_steps, boundary=Boundary.PERIODIC, workers=1,
                 record_every=None):
    """Advance ``n_steps``; returns the final ensemble and the recorded snapshots."""
    snapshots = [e] if record_every else []
    for step in range(1, n_steps + 1):
        e = step_ensemble(e, drift_field, p, boundary, workers)
        if record_every and (step % record_every == 0 or step == n_steps):
            snapshots.append(e)
    logger.info('ensemble of %d particles advanced %d steps to t=%.6g', e.size, n_steps, e.time)
    return e, snapshots


@dataclass(eq=False)
class TransitionKernel:
    """Column-stochastic ``matrix[j, i]``: probability of landing in cell j from cell i."""
    grid: Grid
    matrix: np.ndarray
    kernels: list
    boundary: Boundary = Boundary.PERIODIC

    def __repr__(self):
        return f'<TransitionKernel {self.grid!r} {self.boundary.value}>'

    def column(self, i):
        return self.matrix[:, i]


def cell_kernel(b, p):
    """Maximum-entropy displacement kernel for a particle with drift velocity ``b``."""
    spec = constraint_for(p.alpha, p.mass * b / p.hbar)
    return build_kernel(spec, p.alpha)


def _image_offsets(grid, boundary):
    """Positions whose image under the boundary map is each destination centre."""
    x = grid.centers
    length = grid.length
    if boundary is Boundary.PERIODIC:
        return [x + n * length for n in range(-IMAGES, IMAGES + 1)]
    if boundary is Boundary.REFLECTING:
        mirrored = 2.0 * grid.x_min - x
        return ([x + 2 * n * length for n in range(-IMAGES, IMAGES + 1)]
                + [mirrored + 2 * n * length for n in range(-IMAGES, IMAGES + 1)])
    return [x]


def transition_kernel(drift, p, boundary=Boundary.PERIODIC):
    """Assemble the one-step transition matrix from a GaussianKernel per source cell."""
    grid = drift.grid
    sigma = math.sqrt(p.diffusion * p.dt)
    if sigma < grid.dx:
        raise DomainError('Kernel width sqrt(hbar dt/m) is below the cell size; '
                          'refine the grid or increase dt',
                          {'sigma': sigma, 'dx': grid.dx})
    kernels = [cell_kernel(b, p) for b in drift.values]
    matrix = np.empty((grid.n_cells, grid.n_cells))
    for i, (x_source, kernel) in enumerate(zip(grid.centers, kernels)):
        column = np.zeros(grid.n_cells)
        for targets in _image_offsets(grid, boundary):
            column += kernel.pdf(targets - x_source)
        matrix[:, i] = column * grid.dx

    leak = np.abs(matrix.sum(axis=0) - 1.0)
    if leak.max() > BOUNDARY_TOLERANCE:
        worst = int(np.argmax(leak))
        raise BoundaryError(f'Kernel mass leaks past the grid edges from cell {worst}',
                            {'cell': worst, 'deviation': float(leak[worst])})
    matrix /= matrix.sum(axis=0, keepdims=True)
    return TransitionKernel(grid, matrix, kernels, boundary)


def propagate_density(rho, kernel):
    """rho(x', t') = sum_x P(x'|x) rho(x, t) dx by direct quadrature."""
    rho.grid.check_same(kernel.grid)
    return DensityField(rho.grid, kernel.matrix @ rho.values)


@dataclass(eq=False)
class ReverseKernel:
    """Column-stochastic ``matrix[i, j]``: probability of having come from cell i given cell j."""
    grid: Grid
    matrix: np.ndarray
    undefined: np.ndarray

    def __repr__(self):
        return f'<ReverseKernel {self.grid!r} undefined={int(self.undefined.sum())}>'

    def apply(self, rho_later):
        rho_later.grid.check_same(self.grid)
        return DensityField(self.grid, self.matrix @ rho_later.values)


def reverse_kernel(forward, rho_t, rho_later):
    """Bayes inversion P(x|x') = P(x) P(x'|x) / P(x') of a forward kernel."""
    rho_t.grid.check_same(forward.grid)
    rho_later.grid.check_same(forward.grid)
    predicted = forward.matrix @ rho_t.values
    mismatch = float(np.max(np.abs(predicted - rho_later.values)))
    if mismatch > CONSISTENCY_TOLERANCE:
        raise DomainError('Later density is not the propagation of the earlier one',
                          {'max_deviation': mismatch})

    undefined = predicted <= np.finfo(float).tiny
    joint = forward.matrix.T * rho_t.values[:, None]
    denominator = np.where(undefined, 1.0, predicted)
    matrix = np.where(undefined[None, :], 0.0, joint / denominator[None, :])
    if undefined.any():
        logger.warning('%d destination cells carry no probability; reverse kernel undefined there',
                       int(undefined.sum()))
    return ReverseKernel(forward.grid, matrix, undefined)


def asymmetry(reverse, forward):
    """Sup distance, in density units, between P(x|x') and the argument-swapped P(x'|x)."""
    defined = ~reverse.undefined
    difference = reverse.matrix[:, defined] - forward.matrix.T[:, defined]
    return float(np.max(np.abs(difference)) / forward.grid.dx)


def histogram(e, g):
    """Bin counts normalized by ``N*dx``; particles off the grid are reported, not binned."""
    inside = g.contains(e.positions)
    outside = e.size - int(np.count_nonzero(inside))
    if outside == e.size:
        raise DomainError(f'No particle lies inside {g!r}', {'out_of_range': outside})
    if outside:
        logger.warning('%d of %d particles lie outside %r', outside, e.size, g)
    counts, _ = np.histogram(e.positions[inside], bins=g.edges)
    return DensityField(g, counts / (e.size * g.dx))


def increment_scaling(drift_speed, p, dts, n_particles=100_000, seed=0):
    """Fitted log-log exponents of drift and fluctuation displacement versus dt."""
    grid = Grid(-10.0, 10.0, 64)
    drift = VelocityField.constant(grid, drift_speed)
    drifts, fluctuations = [], []
    for dt in dts:
        start = Ensemble(np.zeros(n_particles), seed)
        moved = step_ensemble(start, drift, p.with_dt(dt))
        displacement = moved.positions - start.positions
        drifts.append(abs(displacement.mean()))
        fluctuations.append(displacement.std(ddof=1))
    log_dt = np.log(np.asarray(dts, dtype=float))
    drift_exponent = np.polyfit(log_dt, np.log(drifts), 1)[0]
    fluctuation_exponent = np.polyfit(log_dt, np.log(fluctuations), 1)[0]
    return float(drift_exponent), float(fluctuation_exponent)
