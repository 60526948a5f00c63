"""Numerical core: maximum-entropy kernels, ensembles, field dynamics,
the Schrödinger reference solver and the measurement model."""

from .errors import (
    LabError, DomainError, ConfigError, NumericalError,
    BoundaryError, StabilityError, CFLViolation
)
from .grid import (
    Grid, PhysicalParams, DensityField, PhaseField, PotentialField, VelocityField
)

__all__ = [
    'LabError', 'DomainError', 'ConfigError', 'NumericalError',
    'BoundaryError', 'StabilityError', 'CFLViolation',
    'Grid', 'PhysicalParams', 'DensityField', 'PhaseField',
    'PotentialField', 'VelocityField'
]
