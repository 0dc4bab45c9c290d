"""Probability kernels for distributed delays.

Gamma kernels (Erlang for integer shape, exponential for shape 1) and
hypoexponential kernels (sums of independent exponentials with possibly
distinct rates), with densities, survival functions, moment generating
functions, moments, and seeded sampling.  All kernel objects are immutable
and safe to share; ``Rng`` instances are single-owner.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm


@dataclass(frozen=True)
class GammaKernel:
    """Gamma density g(s) = a^j s^(j-1) exp(-a s) / Gamma(j)."""

    shape: float  # j
    rate: float  # a

    def __post_init__(self):
        if not (self.shape > 0 and math.isfinite(self.shape)):
            raise ValueError(f"shape must be positive, got {self.shape}")
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ValueError(f"rate must be positive, got {self.rate}")

    @property
    def mean(self):
        return self.shape / self.rate

    @property
    def variance(self):
        return self.shape / self.rate**2


@dataclass(frozen=True)
class HypoexpKernel:
    """Sum of independent exponentials with the given stage rates."""

    rates: tuple

    def __post_init__(self):
        rates = tuple(float(r) for r in self.rates)
        if len(rates) < 1:
            raise ValueError("need at least one stage rate")
        if any(not (r > 0 and math.isfinite(r)) for r in rates):
            raise ValueError(f"all rates must be positive, got {rates}")
        object.__setattr__(self, "rates", rates)

    @property
    def mean(self):
        return sum(1.0 / r for r in self.rates)

    @property
    def variance(self):
        return sum(1.0 / r**2 for r in self.rates)


class Rng:
    """Seeded counter-based generator (Philox); same seed, same stream."""

    def __init__(self, seed=0):
        self.seed = int(seed)
        self.generator = np.random.Generator(np.random.Philox(self.seed))

    def spawn(self, offset=1):
        """Independent stream derived deterministically from this seed."""
        return Rng(self.seed + offset)


# ---------------------------------------------------------------------------
# Regularized incomplete gamma, series/continued-fraction split at x = s + 1.

_MAX_ITER = 500
_EPS = 1e-16


def _lower_series(s, x):
    """P(s, x) by the ascending series; accurate for x < s + 1."""
    term = 1.0 / s
    total = term
    denom = s
    for _ in range(_MAX_ITER):
        denom += 1.0
        term *= x / denom
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + s * math.log(x) - math.lgamma(s))


def _upper_cf(s, x):
    """Q(s, x) by the Lentz continued fraction; accurate for x >= s + 1."""
    tiny = 1e-300
    b = x + 1.0 - s
    c = 1.0 / tiny
    d = 1.0 / b
    f = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        f *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return f * math.exp(-x + s * math.log(x) - math.lgamma(s))


def regularized_gamma_q(s, x):
    """Regularized upper incomplete gamma Q(s, x) = Gamma(s, x)/Gamma(s)."""
    if s <= 0:
        raise ValueError("shape must be positive")
    if x < 0:
        raise ValueError("argument must be nonnegative")
    if x == 0.0:
        return 1.0
    if x < s + 1.0:
        return 1.0 - _lower_series(s, x)
    return _upper_cf(s, x)


# ---------------------------------------------------------------------------
# Gamma kernel operations.


def gamma_pdf(kernel, s):
    """Density of the gamma kernel at s >= 0 (vectorized)."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise ValueError("density argument must be nonnegative")
    j, a = kernel.shape, kernel.rate
    log_norm = j * math.log(a) - math.lgamma(j)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.exp(log_norm + (j - 1.0) * np.log(s_arr) - a * s_arr)
    if j == 1.0:
        out = np.where(s_arr == 0.0, a, out)
    elif j > 1.0:
        out = np.where(s_arr == 0.0, 0.0, out)
    else:
        out = np.where(s_arr == 0.0, np.inf, out)
    return out if out.ndim else float(out)


def gamma_survival(kernel, t):
    """P(T >= t) for the gamma kernel, Q(j, a t) (vectorized)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("time must be nonnegative")
    j, a = kernel.shape, kernel.rate
    out = np.array(
        [regularized_gamma_q(j, a * ti) for ti in np.ravel(t_arr)]
    ).reshape(t_arr.shape)
    return out if out.ndim else float(out)


def gamma_mgf(kernel, theta):
    """E[exp(theta T)] = (1 - theta/a)^(-j), defined for theta < a."""
    j, a = kernel.shape, kernel.rate
    theta_arr = np.asarray(theta, dtype=float)
    if np.any(theta_arr >= a):
        raise ValueError(f"mgf requires theta < rate ({a})")
    out = (1.0 - theta_arr / a) ** (-j)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Hypoexponential kernel operations.


def hypoexp_mgf(kernel, theta):
    """E[exp(theta T)] = prod r_i / (r_i - theta) for theta < min rate."""
    rates = np.asarray(kernel.rates)
    theta_arr = np.asarray(theta, dtype=float)
    if np.any(theta_arr >= rates.min()):
        raise ValueError(f"mgf requires theta < min rate ({rates.min()})")
    out = np.prod(rates / (rates - theta_arr[..., None]), axis=-1)
    out = out.reshape(theta_arr.shape)
    return out if out.ndim else float(out)


def hypoexp_moments(kernel):
    """(mean, variance) = (sum 1/r_i, sum 1/r_i^2)."""
    return kernel.mean, kernel.variance


def _generator(rates):
    """Upper-bidiagonal generator of the sequential Markov chain."""
    n = len(rates)
    q = np.zeros((n, n))
    for i, r in enumerate(rates):
        q[i, i] = -r
        if i + 1 < n:
            q[i, i + 1] = r
    return q


def _occupancies(kernel, t):
    """Stage-occupancy row vectors p(t) = e1 exp(Q t), one row per time."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < 0):
        raise ValueError("time must be nonnegative")
    q = _generator(kernel.rates)
    p0 = np.zeros(len(kernel.rates))
    p0[0] = 1.0
    return np.array([p0 @ expm(q * ti) for ti in t_arr])


def hypoexp_survival(kernel, t):
    """Mass not yet absorbed at time t: integrates the generator from
    unit mass in stage 1.  Robust to repeated and widely separated rates.
    """
    t_arr = np.asarray(t, dtype=float)
    out = np.clip(_occupancies(kernel, t_arr).sum(axis=1), 0.0, 1.0)
    out = out.reshape(t_arr.shape)
    return out if out.ndim else float(out)


def hypoexp_pdf(kernel, t):
    """Absorption-time density: outflow of the final stage, r_n p_n(t)."""
    t_arr = np.asarray(t, dtype=float)
    out = kernel.rates[-1] * _occupancies(kernel, t_arr)[:, -1]
    out = out.reshape(t_arr.shape)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Sampling.


def sample_gamma(rng, kernel, size=None):
    """Gamma variates with the kernel's shape and rate."""
    return rng.generator.gamma(shape=kernel.shape, scale=1.0 / kernel.rate, size=size)


def sample_equilibrium_gamma(rng, kernel, size=None):
    """Variates with density survival(t)/mean (stationary forward recurrence
    time).  Size-bias construction: U * G with U uniform on (0,1) and G
    gamma with shape j+1 at the same rate.
    """
    u = rng.generator.uniform(size=size)
    g = rng.generator.gamma(shape=kernel.shape + 1.0, scale=1.0 / kernel.rate, size=size)
    return u * g
