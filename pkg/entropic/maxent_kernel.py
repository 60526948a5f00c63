"""Maximum-entropy transition kernel.

The kernel P(x'|x) maximizes the relative entropy against a uniform prior subject
to normalization, a fixed expected squared displacement ``kappa`` and a fixed
expected displacement along the drift gradient ``kappa_prime``. The closed form is
an isotropic Gaussian with mean ``grad(phi)/alpha`` and variance ``1/alpha`` per
component. ``maximize_entropy_oracle`` solves the same variational problem by
brute force on a 1-D grid so the closed form can be certified numerically.
"""
from dataclasses import dataclass
import logging
import math
import numbers

import numpy as np
from scipy.special import logsumexp, rel_entr
from scipy.stats import norm

from .errors import DomainError, NumericalError
from .grid import Grid

logger = logging.getLogger(__name__)

NEWTON_TOLERANCE = 1e-10
NEWTON_MAX_ITERATIONS = 100
POINTS_PER_SIGMA = 8
EXTENT_SIGMAS = 8.0
MASS_TOLERANCE = 1e-12


@dataclass(frozen=True)
class ConstraintSpec:
    """Constraint values for one step of the maximum-entropy inference.

    ``kappa_prime`` may be omitted, in which case it takes the value consistent
    with the drift multiplier absorbed into phi (alpha' = 1).
    """
    kappa: float
    dimension: int = 1
    drift_gradient: tuple = (0.0,)
    kappa_prime: float = None

    def __post_init__(self):
        gradient = tuple(float(g) for g in np.atleast_1d(self.drift_gradient))
        object.__setattr__(self, 'drift_gradient', gradient)
        if not (math.isfinite(self.kappa) and self.kappa > 0):
            raise DomainError(f'kappa must be positive, got {self.kappa}')
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise DomainError(f'dimension must be >= 1, got {self.dimension}')
        if len(gradient) != self.dimension:
            raise DomainError(f'drift_gradient has {len(gradient)} components, '
                              f'expected {self.dimension}')
        if not all(math.isfinite(g) for g in gradient):
            raise DomainError('drift_gradient components must be finite')
        if self.kappa_prime is None:
            g2 = float(np.dot(gradient, gradient))
            object.__setattr__(self, 'kappa_prime', g2 / solve_alpha(self))

    @property
    def gradient(self):
        return np.array(self.drift_gradient)


@dataclass(frozen=True, eq=False)
class GaussianKernel:
    alpha: float
    mean: np.ndarray
    covariance_scale: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise DomainError(f'alpha must be positive, got {self.alpha}')
        object.__setattr__(self, 'mean', np.atleast_1d(np.asarray(self.mean, dtype=float)))
        if not math.isclose(self.covariance_scale, 1.0 / self.alpha, rel_tol=1e-12):
            raise DomainError('covariance_scale must equal 1/alpha')

    def __repr__(self):
        return f'<GaussianKernel alpha={self.alpha:.6g} mean={self.mean.tolist()}>'

    @property
    def dimension(self):
        return self.mean.size

    @property
    def std(self):
        return math.sqrt(self.covariance_scale)

    def pdf(self, displacements):
        """Density of displacements; shape ``(n, d)`` or ``(n,)`` when d == 1."""
        dx = np.asarray(displacements, dtype=float)
        if self.dimension == 1 and dx.ndim <= 1:
            dx = dx[..., None]
        sq = np.sum((dx - self.mean) ** 2, axis=-1)
        norm_const = (self.alpha / (2.0 * np.pi)) ** (self.dimension / 2.0)
        return norm_const * np.exp(-0.5 * self.alpha * sq)

    def sample(self, n, rng):
        return self.mean + self.std * rng.standard_normal((int(n), self.dimension))

    def discretize(self, support):
        """Point-sample the density on a 1-D support and normalize the cell masses."""
        if self.dimension != 1:
            raise DomainError('Only 1-D kernels can be discretized')
        weights = self.pdf(support.centers) * support.dx
        return DiscretizedKernel(support, weights / weights.sum())


@dataclass(frozen=True)
class LagrangeMultipliers:
    alpha: float
    alpha_prime: float
    iterations: int
    residual: float


@dataclass(frozen=True, eq=False)
class DiscretizedKernel:
    support: Grid
    probabilities: np.ndarray
    multipliers: LagrangeMultipliers = None

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if p.shape != (self.support.n_cells,):
            raise DomainError('One probability per support cell is required')
        if np.any(p < 0):
            raise DomainError('Probabilities must be non-negative')
        if abs(p.sum() - 1.0) > MASS_TOLERANCE:
            raise DomainError(f'Total mass {p.sum()!r} differs from 1')
        object.__setattr__(self, 'probabilities', p)

    def moments(self):
        x = self.support.centers
        return float(self.probabilities @ x), float(self.probabilities @ x ** 2)

    @classmethod
    def uniform(cls, support):
        return cls(support, np.full(support.n_cells, 1.0 / support.n_cells))


def solve_alpha(spec):
    """Positive root of ``kappa = d/alpha + |grad phi|^2/alpha^2``."""
    g2 = float(np.dot(spec.drift_gradient, spec.drift_gradient))
    d = spec.dimension
    return (d + math.sqrt(d * d + 4.0 * spec.kappa * g2)) / (2.0 * spec.kappa)


def constraint_for(alpha, drift_gradient):
    """The ConstraintSpec whose multiplier conditions are met by ``alpha``."""
    if not (math.isfinite(alpha) and alpha > 0):
        raise DomainError(f'alpha must be positive, got {alpha}')
    gradient = np.atleast_1d(np.asarray(drift_gradient, dtype=float))
    g2 = float(gradient @ gradient)
    return ConstraintSpec(kappa=gradient.size / alpha + g2 / alpha ** 2,
                          dimension=gradient.size,
                          drift_gradient=tuple(gradient),
                          kappa_prime=g2 / alpha)


def build_kernel(spec, alpha):
    """Closed-form maximum-entropy kernel for multiplier ``alpha``."""
    if not (isinstance(alpha, numbers.Real) and math.isfinite(alpha) and alpha > 0):
        raise DomainError(f'alpha must be a positive finite scalar, got {alpha!r}')
    alpha = float(alpha)
    kernel = GaussianKernel(alpha=alpha, mean=spec.gradient / alpha,
                            covariance_scale=1.0 / alpha)
    implied_kappa, _ = kernel_moments(kernel)
    if not math.isclose(implied_kappa, spec.kappa, rel_tol=1e-9):
        logger.debug('kappa=%g differs from the value %g implied by alpha=%g',
                     spec.kappa, implied_kappa, alpha)
    return kernel


def kernel_moments(kernel):
    """Return ``(<dx.dx>, <dx>.grad phi)``, the kappa and kappa' the kernel satisfies."""
    mean_sq = float(kernel.mean @ kernel.mean)
    expected_sq_displacement = kernel.dimension / kernel.alpha + mean_sq
    drift_projection = kernel.alpha * mean_sq
    return expected_sq_displacement, drift_projection


def relative_entropy(p, q):
    """``-sum p log(p/q)`` in nats; zero for p == q and never positive."""
    p.support.check_same(q.support)
    if np.any((p.probabilities > 0) & (q.probabilities <= 0)):
        raise DomainError('p has mass where the prior q vanishes')
    return float(-np.sum(rel_entr(p.probabilities, q.probabilities)))


def total_variation(p, q):
    p.support.check_same(q.support)
    return 0.5 * float(np.sum(np.abs(p.probabilities - q.probabilities)))


def oracle_support(kernel, points_per_sigma=POINTS_PER_SIGMA, extent=EXTENT_SIGMAS):
    """Grid of displacements spanning ``mean +/- extent*sigma``."""
    if kernel.dimension != 1:
        raise DomainError('The oracle works on 1-D supports only')
    n_cells = max(8, int(math.ceil(2.0 * extent * points_per_sigma)))
    return Grid.centered(float(kernel.mean[0]), extent * kernel.std, n_cells)


def maximize_entropy_oracle(spec, support, tolerance=NEWTON_TOLERANCE,
                            max_iterations=NEWTON_MAX_ITERATIONS):
    """Brute-force maximum-entropy distribution on a discrete 1-D support.

    Newton iteration on the natural parameters of ``p ∝ exp(-alpha/2 x^2 +
    alpha' x g)``; the step is damped by halving until the constraint residual
    decreases, and regularized when the covariance Hessian is ill-conditioned.
    """
    if spec.dimension != 1:
        raise DomainError('The oracle works on 1-D supports only')
    x = support.centers
    g = spec.drift_gradient[0]
    has_drift = g != 0.0

    if has_drift:
        mean_guess = spec.kappa_prime / g
        features = np.column_stack([x ** 2, x * g])
        targets = np.array([spec.kappa, spec.kappa_prime])
    else:
        if abs(spec.kappa_prime) > tolerance:
            raise DomainError('kappa_prime must vanish when the drift gradient is zero')
        mean_guess = 0.0
        features = (x ** 2)[:, None]
        targets = np.array([spec.kappa])
    var_guess = spec.kappa - mean_guess ** 2
    if var_guess <= 0:
        raise DomainError('Constraints are infeasible: kappa <= <dx>^2',
                          {'kappa': spec.kappa, 'kappa_prime': spec.kappa_prime})

    sigma = math.sqrt(var_guess)
    covered = norm.cdf(support.x_max, mean_guess, sigma) - norm.cdf(support.x_min, mean_guess, sigma)
    if covered < 1.0 - 1e-9:
        raise DomainError('Support too narrow for the constrained distribution',
                          {'covered_mass': float(covered)})

    a = 1.0 / var_guess
    theta = np.array([-0.5 * a, mean_guess * a / g]) if has_drift else np.array([-0.5 * a])

    def distribution(params):
        log_weights = features @ params
        return np.exp(log_weights - logsumexp(log_weights))

    def residual_of(params):
        p = distribution(params)
        return p, features.T @ p - targets

    p, residual = residual_of(theta)
    for iteration in range(1, max_iterations + 1):
        res_norm = float(np.max(np.abs(residual)))
        logger.debug('oracle iteration %d residual %.3e', iteration, res_norm)
        if res_norm <= tolerance:
            break
        centered = features - features.T @ p
        hessian = centered.T @ (centered * p[:, None])
        if np.linalg.cond(hessian) > 1e12:
            hessian = hessian + 1e-12 * np.trace(hessian) * np.eye(len(theta))
        step = np.linalg.solve(hessian, residual)

        t = 1.0
        while True:
            candidate = theta - t * step
            p_new, residual_new = residual_of(candidate)
            if np.linalg.norm(residual_new) < np.linalg.norm(residual) or t < 1e-8:
                break
            t *= 0.5
        theta, p, residual = candidate, p_new, residual_new
    else:
        res_norm = float(np.max(np.abs(residual)))
        if res_norm > tolerance:
            raise NumericalError(
                f'Newton iteration did not converge in {max_iterations} iterations',
                {'residual': res_norm, 'iterations': max_iterations,
                 'multipliers': theta.tolist()})
        iteration = max_iterations

    multipliers = LagrangeMultipliers(
        alpha=float(-2.0 * theta[0]),
        alpha_prime=float(theta[1]) if has_drift else 1.0,
        iterations=iteration,
        residual=float(np.max(np.abs(residual))))
    logger.info('oracle converged: alpha=%.12g alpha_prime=%.12g after %d iterations',
                multipliers.alpha, multipliers.alpha_prime, multipliers.iterations)
    return DiscretizedKernel(support, p / p.sum(), multipliers)


def kernel_scaling(drift_gradient, alphas, samples=None, rng=None):
    """Fitted log-log exponents of |mean| and per-component std versus alpha.

    With ``samples`` the moments are Monte Carlo estimates from ``rng``,
    otherwise the closed-form values are used.
    """
    means, stds = [], []
    for alpha in alphas:
        spec = constraint_for(alpha, drift_gradient)
        kernel = build_kernel(spec, alpha)
        if samples:
            draws = kernel.sample(samples, rng)
            means.append(np.linalg.norm(draws.mean(axis=0)))
            stds.append(float(np.mean(draws.std(axis=0, ddof=1))))
        else:
            means.append(np.linalg.norm(kernel.mean))
            stds.append(kernel.std)
    log_alpha = np.log(np.asarray(alphas, dtype=float))
    mean_exponent = np.polyfit(log_alpha, np.log(means), 1)[0]
    std_exponent = np.polyfit(log_alpha, np.log(stds), 1)[0]
    return float(mean_exponent), float(std_exponent)
