"""Uniform 1-D grid, physical constants and the fields that live on the grid.

All fields are cell-centred: cell ``i`` covers ``[x_min + i*dx, x_min + (i+1)*dx)``
and its value is attached to the centre. Difference operators here are periodic.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class Grid:
    x_min: float
    x_max: float
    n_cells: int

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < 8:
            raise DomainError(f'Grid needs at least 8 cells, got {self.n_cells}')
        if not (math.isfinite(self.x_min) and math.isfinite(self.x_max)):
            raise DomainError('Grid bounds must be finite')
        if self.x_max <= self.x_min:
            raise DomainError(f'Empty grid range [{self.x_min}, {self.x_max}]')
        object.__setattr__(self, 'n_cells', int(self.n_cells))

    def __repr__(self):
        return f'<Grid [{self.x_min}, {self.x_max}) n={self.n_cells}>'

    @property
    def length(self):
        return self.x_max - self.x_min

    @property
    def dx(self):
        return (self.x_max - self.x_min) / self.n_cells

    @property
    def centers(self):
        return self.x_min + (np.arange(self.n_cells) + 0.5) * self.dx

    @property
    def edges(self):
        return self.x_min + np.arange(self.n_cells + 1) * self.dx

    @classmethod
    def centered(cls, center, half_width, n_cells):
        return cls(center - half_width, center + half_width, n_cells)

    def contains(self, x):
        x = np.asarray(x)
        return (x >= self.x_min) & (x <= self.x_max)

    def wrap(self, x):
        """Map positions back into the periodic cell ``[x_min, x_max)``."""
        return self.x_min + np.mod(np.asarray(x) - self.x_min, self.length)

    def reflect(self, x):
        """Fold positions into ``[x_min, x_max]`` by mirror reflection at the edges."""
        y = np.mod(np.asarray(x) - self.x_min, 2.0 * self.length)
        y = np.where(y > self.length, 2.0 * self.length - y, y)
        return self.x_min + y

    def check_same(self, other):
        if self != other:
            raise DomainError(f'Grid mismatch: {self!r} vs {other!r}')

    def to_dict(self):
        return {'x_min': self.x_min, 'x_max': self.x_max, 'n_cells': self.n_cells}

    @classmethod
    def from_dict(cls, data):
        return cls(float(data['x_min']), float(data['x_max']), int(data['n_cells']))


@dataclass(frozen=True)
class PhysicalParams:
    """Mass, reduced Planck constant and the entropic time step."""
    mass: float = 1.0
    hbar: float = 1.0
    dt: float = 1e-3

    def __post_init__(self):
        for name in ('mass', 'hbar', 'dt'):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f'{name} must be finite and strictly positive, got {value}')
        if not math.isfinite(self.alpha):
            raise DomainError('alpha = m/(hbar*dt) is not finite')

    @property
    def alpha(self):
        return self.mass / (self.hbar * self.dt)

    @property
    def diffusion(self):
        """ħ/m, the variance of the fluctuation per unit time."""
        return self.hbar / self.mass

    def with_dt(self, dt):
        return PhysicalParams(self.mass, self.hbar, dt)

    def to_dict(self):
        return {'mass': self.mass, 'hbar': self.hbar, 'dt': self.dt}

    @classmethod
    def from_dict(cls, data):
        return cls(float(data.get('mass', 1.0)), float(data.get('hbar', 1.0)),
                   float(data.get('dt', 1e-3)))


def _as_cell_array(grid, values, dtype=float):
    array = np.array(values, dtype=dtype)
    if array.shape != (grid.n_cells,):
        raise DomainError(f'Expected {grid.n_cells} cell values, got shape {array.shape}')
    if not np.all(np.isfinite(array)):
        raise DomainError('Field values must be finite')
    return array


@dataclass(eq=False)
class DensityField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = _as_cell_array(self.grid, self.values)

    def __repr__(self):
        return f'<DensityField {self.grid!r} mass={self.mass:.12g}>'

    @property
    def mass(self):
        return float(np.sum(self.values) * self.grid.dx)

    @property
    def masses(self):
        return self.values * self.grid.dx

    def mean(self):
        return float(np.sum(self.grid.centers * self.values) * self.grid.dx / self.mass)

    def variance(self):
        mu = self.mean()
        return float(np.sum((self.grid.centers - mu) ** 2 * self.values) * self.grid.dx / self.mass)

    def check_valid(self, tolerance=1e-9):
        """Raise DomainError unless the density is non-negative with unit mass."""
        if np.any(self.values < 0):
            raise DomainError('Density has negative cells',
                              {'min_value': float(self.values.min())})
        if abs(self.mass - 1.0) > tolerance:
            raise DomainError(f'Density is not normalized: mass={self.mass!r}',
                              {'mass': self.mass, 'tolerance': tolerance})
        return self

    def normalized(self):
        mass = self.mass
        if mass <= 0:
            raise DomainError('Cannot normalize a density with zero mass')
        return DensityField(self.grid, self.values / mass)

    def coarsened(self, factor):
        """Merge every ``factor`` neighbouring cells; cell masses add up."""
        n = self.grid.n_cells
        if int(factor) != factor or factor < 1 or n % factor:
            raise DomainError(f'{n} cells cannot be merged in blocks of {factor}')
        coarse = Grid(self.grid.x_min, self.grid.x_max, n // int(factor))
        return DensityField(coarse, self.values.reshape(-1, int(factor)).mean(axis=1))

    @classmethod
    def from_function(cls, grid, func):
        """Sample ``func`` at the cell centres and normalize."""
        return cls(grid, func(grid.centers)).normalized()

    @classmethod
    def uniform(cls, grid):
        return cls(grid, np.full(grid.n_cells, 1.0 / grid.length))


@dataclass(eq=False)
class PhaseField:
    grid: Grid
    values: np.ndarray
    flags: np.ndarray = None

    def __post_init__(self):
        self.values = _as_cell_array(self.grid, self.values)
        if self.flags is None:
            self.flags = np.zeros(self.grid.n_cells, dtype=bool)

    def __repr__(self):
        return f'<PhaseField {self.grid!r} flagged={int(self.flags.sum())}>'

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.n_cells))


@dataclass(eq=False)
class PotentialField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = _as_cell_array(self.grid, self.values)

    def __repr__(self):
        return f'<PotentialField {self.grid!r}>'

    def shifted(self, constant):
        return PotentialField(self.grid, self.values + constant)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.n_cells))


@dataclass(eq=False)
class VelocityField:
    grid: Grid
    values: np.ndarray
    flags: np.ndarray = field(default=None)

    def __post_init__(self):
        self.values = _as_cell_array(self.grid, self.values)
        if self.flags is None:
            self.flags = np.zeros(self.grid.n_cells, dtype=bool)

    def __repr__(self):
        return f'<VelocityField {self.grid!r} max|v|={self.max_speed:.6g}>'

    @property
    def max_speed(self):
        return float(np.max(np.abs(self.values)))

    @classmethod
    def constant(cls, grid, value):
        return cls(grid, np.full(grid.n_cells, float(value)))


# Periodic difference operators

def wrap_phase(delta):
    """Reduce phase differences into ``[-pi, pi)``."""
    return np.mod(delta + np.pi, 2.0 * np.pi) - np.pi


def forward_difference(values):
    """``values[i+1] - values[i]`` with periodic wrap-around (face i+1/2)."""
    return np.roll(values, -1) - values


def central_gradient(values, dx):
    return (np.roll(values, -1) - np.roll(values, 1)) / (2.0 * dx)


def phase_central_gradient(values, dx):
    """Central gradient of a phase, insensitive to 2π jumps between neighbours."""
    return wrap_phase(np.roll(values, -1) - np.roll(values, 1)) / (2.0 * dx)


def face_average(values):
    return 0.5 * (values + np.roll(values, -1))
