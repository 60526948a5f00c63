from dataclasses import dataclass
import math

import numpy as np

from entropic.errors import DomainError

METRICS = ('L1', 'L2', 'sup')


@dataclass
class ComparisonReport:
    """One checked quantity. ``bound='upper'`` passes when value <= tolerance,
    ``bound='lower'`` when value >= tolerance."""
    scenario: str
    metric: str
    value: float
    tolerance: float
    runtime: float = 0.0
    bound: str = 'upper'
    passed: bool = None

    def __post_init__(self):
        self.value = float(self.value)
        if self.bound == 'upper':
            self.passed = bool(self.value <= self.tolerance)
        else:
            self.passed = bool(self.value >= self.tolerance)
        if math.isnan(self.value):
            self.passed = False

    def to_dict(self, timing=True):
        data = {
            'scenario': self.scenario,
            'metric': self.metric,
            'value': self.value,
            'tolerance': self.tolerance,
            'bound': self.bound,
            'passed': self.passed
        }
        if timing:
            data['runtime'] = self.runtime
        return data


def compare_fields(a, b, metric):
    """L1 = Σ|a-b|dx, L2 = (Σ(a-b)²dx)^½, sup = max|a-b|."""
    a.grid.check_same(b.grid)
    if metric not in METRICS:
        raise DomainError(f'Unknown metric {metric!r}', {'known': list(METRICS)})
    difference = np.abs(a.values - b.values)
    dx = a.grid.dx
    if metric == 'L1':
        return float(np.sum(difference) * dx)
    if metric == 'L2':
        return float(math.sqrt(np.sum(difference ** 2) * dx))
    return float(np.max(difference))


def weighted_velocity_distance(rho, v_a, v_b):
    """Density-weighted L2 distance between two velocity fields, flagged cells excluded."""
    rho.grid.check_same(v_a.grid)
    rho.grid.check_same(v_b.grid)
    weight = np.where(v_a.flags | v_b.flags, 0.0, rho.values)
    return float(math.sqrt(np.sum(weight * (v_a.values - v_b.values) ** 2) * rho.grid.dx))


def all_passed(reports):
    return all(report.passed for report in reports)
