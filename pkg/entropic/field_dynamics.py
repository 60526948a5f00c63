"""Coupled continuity and quantum Hamilton–Jacobi dynamics of (ρ, Φ) on a periodic grid.

Discretization
--------------
With ``R = sqrt(ρ)`` and face phase differences ``Δ[i+1/2] = Φ[i+1] - Φ[i]`` the
discrete energy is

    E = Σ (ħ²/2m dx) [ (R[i+1] - R[i])² + 4 R[i] R[i+1] sin²(Δ/2) ] + Σ ρ V dx

which equals the energy of ``Ψ = R e^{iΦ}`` under the three-point Laplacian. Its
functional derivatives give the face flux ``(ħ/m) R[i] R[i+1] sin(Δ) / dx`` and
``-ħ ∂tΦ = δE/δρ``, so the semi-discrete flow conserves E exactly, the flux form
conserves mass exactly, and a phase jump of π across a node carries no current.
For smooth fields the two face terms reduce to ``(ħ²/2m)|∇R|²`` and
``(ħ²/2m) ρ (∇Φ)²``.
"""
from dataclasses import dataclass, field
import logging
import math

import numpy as np

from .errors import CFLViolation, DomainError, StabilityError
from .grid import (
    DensityField, PhaseField, VelocityField, central_gradient, face_average,
    forward_difference, phase_central_gradient
)

logger = logging.getLogger(__name__)

DENSITY_FLOOR = 1e-12
CFL_LIMIT = 0.5
DIFFUSION_LIMIT = 0.5
MASS_DRIFT_LIMIT = 1e-6


@dataclass
class EnergyReport:
    kinetic: float
    osmotic: float
    potential: float
    local_energy: np.ndarray = field(repr=False)

    @property
    def total(self):
        return self.kinetic + self.osmotic + self.potential

    def to_dict(self):
        return {
            'total': self.total,
            'kinetic': self.kinetic,
            'osmotic': self.osmotic,
            'potential': self.potential
        }


def _floored_amplitude(rho, floor=DENSITY_FLOOR):
    threshold = floor * rho.values.max()
    flags = rho.values < threshold
    return np.sqrt(np.maximum(rho.values, threshold)), flags


def osmotic_velocity(rho, p, floor=DENSITY_FLOOR):
    """u = -(ħ/m) ∇ log ρ^{1/2}; cells below the floor are clamped and flagged."""
    amplitude, flags = _floored_amplitude(rho, floor)
    if flags.any():
        logger.warning('osmotic velocity: %d cells clamped at the density floor', int(flags.sum()))
    values = -p.diffusion * central_gradient(np.log(amplitude), rho.grid.dx)
    return VelocityField(rho.grid, values, flags)


def current_velocity(phi, p):
    """v = (ħ/m) ∇Φ."""
    values = p.diffusion * phase_central_gradient(phi.values, phi.grid.dx)
    return VelocityField(phi.grid, values, phi.flags.copy())


def drift_velocity(rho, phi, p):
    """b = v - u, the drift implied by the phase and the density."""
    rho.grid.check_same(phi.grid)
    v = current_velocity(phi, p)
    u = osmotic_velocity(rho, p)
    return VelocityField(rho.grid, v.values - u.values, v.flags | u.flags)


def _face_flux(rho_values, face_velocity):
    return face_average(rho_values) * face_velocity


def _divergence(face_values, dx):
    return (face_values - np.roll(face_values, 1)) / dx


def _rk4(rate, y, dt):
    k1 = rate(y)
    k2 = rate(y + 0.5 * dt * k1)
    k3 = rate(y + 0.5 * dt * k2)
    k4 = rate(y + dt * k3)
    return y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def fp_step(rho, v, dt):
    """Advance ∂tρ = -∇·(ρv) with frozen v by one flux-form RK4 step."""
    rho.grid.check_same(v.grid)
    dx = rho.grid.dx
    speed = v.max_speed
    if speed * dt / dx > CFL_LIMIT:
        raise CFLViolation(f'CFL number {speed * dt / dx:.3g} exceeds {CFL_LIMIT}',
                           suggested_dt=CFL_LIMIT * dx / speed)
    face_velocity = face_average(v.values)

    def rate(values):
        return -_divergence(_face_flux(values, face_velocity), dx)

    return DensityField(rho.grid, _rk4(rate, rho.values, dt))


def fokker_planck_step(rho, drift, p, dt):
    """Advance ∂tρ = -∇·(ρb) + (ħ/2m)∇²ρ by one flux-form RK4 step."""
    rho.grid.check_same(drift.grid)
    dx = rho.grid.dx
    diffusion = 0.5 * p.diffusion
    limits = [DIFFUSION_LIMIT * dx ** 2 / diffusion]
    if drift.max_speed > 0:
        limits.append(CFL_LIMIT * dx / drift.max_speed)
    if dt > min(limits):
        raise CFLViolation(f'dt={dt:g} exceeds the stable limit {min(limits):.3g}',
                           suggested_dt=min(limits))
    face_drift = face_average(drift.values)

    def rate(values):
        flux = _face_flux(values, face_drift) - diffusion * forward_difference(values) / dx
        return -_divergence(flux, dx)

    return DensityField(rho.grid, _rk4(rate, rho.values, dt))


def _amplitudes(rho_values, floor=DENSITY_FLOOR):
    """(R, R clamped at the floor, flags); only divisions use the clamped values."""
    threshold = floor * rho_values.max()
    amplitude = np.sqrt(np.maximum(rho_values, 0.0))
    return amplitude, np.sqrt(np.maximum(rho_values, threshold)), rho_values < threshold


def _rates(rho_values, phi_values, V, p, dx, floor=DENSITY_FLOOR):
    """(∂tρ, ∂tΦ, flags) for the coupled system."""
    amplitude, clamped, flags = _amplitudes(rho_values, floor)
    delta = forward_difference(phi_values)
    right = np.roll(amplitude, -1)
    flux = p.diffusion * amplitude * right * np.sin(delta) / dx
    drho = -_divergence(flux, dx)

    coefficient = p.hbar ** 2 / (2.0 * p.mass * dx ** 2)
    # R[i+1] cos Δ[i+1/2] + R[i-1] cos Δ[i-1/2]
    neighbours = right * np.cos(delta) + np.roll(amplitude, 1) * np.cos(np.roll(delta, 1))
    dphi = (coefficient * (neighbours - 2.0 * amplitude) / clamped - V.values) / p.hbar
    return drho, dphi, flags


def qhj_rhs(rho, phi, V, p):
    """∂tΦ from ħ∂tΦ = -[(ħ²/2m)(∇Φ)² + V + Q], Q = -(ħ²/2m) ∇²ρ^{1/2}/ρ^{1/2}."""
    rho.grid.check_same(phi.grid)
    rho.grid.check_same(V.grid)
    _, dphi, flags = _rates(rho.values, phi.values, V, p, rho.grid.dx)
    if flags.any():
        logger.warning('quantum potential: %d cells clamped at the density floor', int(flags.sum()))
    return PhaseField(rho.grid, dphi, flags)


def hj_residual(rho, phi, phi_dot, V, p):
    """ħΦ̇ + (ħ²/2m)(∇Φ)² + V + Q cellwise; zero when Φ̇ obeys the Hamilton–Jacobi law."""
    expected = qhj_rhs(rho, phi, V, p)
    return p.hbar * (np.asarray(phi_dot) - expected.values)


def total_energy(rho, phi, V, p):
    rho.grid.check_same(phi.grid)
    rho.grid.check_same(V.grid)
    dx = rho.grid.dx
    coefficient = p.hbar ** 2 / (2.0 * p.mass * dx ** 2)
    amplitude, clamped, _ = _amplitudes(rho.values)
    right = np.roll(amplitude, -1)
    half_delta = 0.5 * forward_difference(phi.values)

    kinetic_faces = coefficient * 4.0 * amplitude * right * np.sin(half_delta) ** 2
    osmotic_faces = coefficient * (right - amplitude) ** 2
    # ε = ½mv² + ½mu² + V with face terms split evenly between neighbouring cells
    faces = kinetic_faces + osmotic_faces
    local = 0.5 * (faces + np.roll(faces, 1)) / clamped ** 2 + V.values
    return EnergyReport(
        kinetic=float(np.sum(kinetic_faces) * dx),
        osmotic=float(np.sum(osmotic_faces) * dx),
        potential=float(np.sum(rho.values * V.values) * dx),
        local_energy=local)


def local_energy(rho, phi, V, p):
    """ε(x,t) = ½mv² + ½mu² + V; its density-weighted integral is the total energy."""
    return total_energy(rho, phi, V, p).local_energy


def energy_gradients(rho, phi, V, p):
    """Discrete δE/δρ and δE/δΦ per unit length, equal to -ħ∂tΦ and ħ∂tρ."""
    drho, dphi, _ = _rates(rho.values, phi.values, V, p, rho.grid.dx)
    return -p.hbar * dphi, p.hbar * drho


def stable_time_step(rho, phi, V, p):
    """Largest dt meeting the advective CFL limit and the dispersive RK4 limit."""
    dx = rho.grid.dx
    speed = current_velocity(phi, p).max_speed
    frequency = 2.0 * p.diffusion / dx ** 2 + float(np.max(np.abs(V.values))) / p.hbar
    limits = [1.0 / frequency]
    if speed > 0:
        limits.append(CFL_LIMIT * dx / speed)
    return min(limits)


@dataclass
class FieldTrajectory:
    times: list = field(default_factory=list)
    densities: list = field(default_factory=list)
    phases: list = field(default_factory=list)
    energies: list = field(default_factory=list)
    masses: list = field(default_factory=list)
    n_steps: int = 0
    dt: float = 0.0

    def mass_drift(self):
        return max(abs(m - self.masses[0]) for m in self.masses)

    @property
    def final(self):
        return self.densities[-1], self.phases[-1]


def evolve_coupled(rho, phi, V, p, t_final, snapshot_every=100, dt=None):
    """RK4 integration of the coupled (ρ, Φ) system up to exactly ``t_final``.

    Aborts with StabilityError when fields become non-finite or the mass drifts
    by more than 1e-6.
    """
    rho.grid.check_same(phi.grid)
    rho.grid.check_same(V.grid)
    if not t_final > 0:
        raise DomainError(f't_final must be positive, got {t_final}')
    dx = rho.grid.dx
    requested = p.dt if dt is None else dt
    limit = stable_time_step(rho, phi, V, p)
    if requested > limit:
        raise CFLViolation(f'dt={requested:g} exceeds the stable step {limit:.3g}',
                           suggested_dt=limit)
    n_steps = max(1, int(math.ceil(t_final / requested - 1e-9)))
    dt = t_final / n_steps
    n = rho.grid.n_cells

    def rate(state):
        drho, dphi, _ = _rates(state[:n], state[n:], V, p, dx)
        return np.concatenate([drho, dphi])

    trajectory = FieldTrajectory(n_steps=n_steps, dt=dt)
    initial_mass = rho.mass

    def record(step, state):
        density = DensityField(rho.grid, state[:n])
        _, flags = _floored_amplitude(density)
        phase = PhaseField(rho.grid, state[n:], flags)
        trajectory.times.append(step * dt)
        trajectory.densities.append(density)
        trajectory.phases.append(phase)
        trajectory.energies.append(total_energy(density, phase, V, p))
        trajectory.masses.append(density.mass)

    state = np.concatenate([rho.values, phi.values])
    record(0, state)
    for step in range(1, n_steps + 1):
        state = _rk4(rate, state, dt)
        if not np.all(np.isfinite(state)):
            raise StabilityError('Non-finite fields during coupled evolution',
                                 {'step': step, 'time': step * dt})
        mass = float(np.sum(state[:n]) * dx)
        if abs(mass - initial_mass) > MASS_DRIFT_LIMIT:
            raise StabilityError('Mass drift exceeds tolerance during coupled evolution',
                                 {'step': step, 'time': step * dt, 'mass': mass})
        if step % snapshot_every == 0 or step == n_steps:
            record(step, state)
    logger.info('coupled run: %d steps of dt=%.3g, energy drift %.3e',
                n_steps, dt, energy_drift(trajectory))
    return trajectory


def energy_drift(trajectory):
    """Max |E(t) - E(0)| / |E(0)| over the snapshots (absolute when E(0) = 0)."""
    totals = np.array([report.total for report in trajectory.energies])
    deviation = float(np.max(np.abs(totals - totals[0])))
    if totals[0] == 0:
        return deviation
    return deviation / abs(totals[0])
