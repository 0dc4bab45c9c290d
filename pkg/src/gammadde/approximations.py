"""Finite chains of exponentials approximating a gamma kernel.

Four variants, all parameterized by the gamma shape j and mean tau:

* ``erlang``: round j to the nearest integer, match the mean only.
* ``fixed``: n = max(ceil(j), 2) stages; n-2 stages at rate n/tau plus two
  free rates chosen so the first two moments match exactly.  The common
  rate jumps as j crosses integers.
* ``smoothed``: common rate j/tau varies continuously in j; the two free
  rates again match both moments exactly.
* ``smoothed_regularized``: smoothed rates nudged by (eps, hbar) so they
  stay bounded and differentiable near integer j, trading a controlled
  O(eps + hbar^2) variance error for non-stiff, optimizer-friendly chains.
"""

import math
from dataclasses import dataclass

from .distributions import HypoexpKernel

_VARIANTS = ("erlang", "fixed", "smoothed", "smoothed_regularized")


@dataclass(frozen=True)
class ChainParams:
    """Stage count and rates of one chain approximation.

    Stages 1..n-2 share ``common_rate``; the last two run at ``nu`` then
    ``mu``.  For ``erlang`` (and integer shapes generally) all three
    coincide.  Convolution commutes, so the order of the two tail stages
    does not affect the distribution.
    """

    n: int
    common_rate: float
    nu: float
    mu: float
    variant: str

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.n < 1:
            raise ValueError("need at least one stage")
        for name in ("common_rate", "nu", "mu"):
            r = getattr(self, name)
            if not (r > 0 and math.isfinite(r)):
                raise ValueError(f"{name} must be positive and finite, got {r}")

    def rates(self):
        """Stage rates in chain order."""
        if self.variant == "erlang":
            return (self.common_rate,) * self.n
        if self.n == 1:
            return (self.mu,)
        return (self.common_rate,) * (self.n - 2) + (self.nu, self.mu)

    def kernel(self):
        return HypoexpKernel(self.rates())

    @property
    def mean(self):
        return sum(1.0 / r for r in self.rates())

    @property
    def variance(self):
        return sum(1.0 / r**2 for r in self.rates())


@dataclass(frozen=True)
class ApproxConfig:
    """Regularization offsets and the stiffness guard threshold."""

    eps: float = 1e-3
    hbar: float = 1e-3
    stiffness_threshold: float = 100.0

    def __post_init__(self):
        if not (0 <= self.eps < 1):
            raise ValueError("eps must lie in [0, 1)")
        if self.hbar < 0:
            raise ValueError("hbar must be nonnegative")


def nearest_shape(j):
    """Nearest integer to j, rounding halves up and never below 1."""
    return max(1, math.floor(j + 0.5))


def _is_integer(j):
    return float(j).is_integer()


def _check_positive(j, tau):
    if not (j > 0 and math.isfinite(j)):
        raise ValueError(f"shape must be positive, got {j}")
    if not (tau > 0 and math.isfinite(tau)):
        raise ValueError(f"mean must be positive, got {tau}")


def erlang_approx(j, tau):
    """Erlang chain with shape [j] and rate [j]/tau; mean matched, variance
    generally not."""
    _check_positive(j, tau)
    n = nearest_shape(j)
    b = n / tau
    return ChainParams(n=n, common_rate=b, nu=b, mu=b, variant="erlang")


def fixed_hypoexp(j, tau):
    """Two-moment chain with n = max(ceil(j), 2) and common rate n/tau.

    The two tail residence times are the roots of a quadratic fixed by the
    moment equations; the smaller root degenerates to zero as j drops
    to 1, which is rejected (and flagged as stiffness before that).
    """
    _check_positive(j, tau)
    n = max(math.ceil(j), 2)
    # n - j equals 1 - frac(j) for non-integer j and vanishes at integers,
    # where the construction reduces to the exact Erlang chain.
    disc = math.sqrt(n * (n - j) / (2.0 * j))
    inv_nu = (tau / n) * (1.0 + disc)
    inv_mu = (tau / n) * (1.0 - disc)
    if inv_mu <= 0:
        raise ValueError(
            f"two-moment chain infeasible for shape {j}: tail residence time "
            f"{inv_mu:.3g} is non-positive (occurs as shape approaches 1)"
        )
    return ChainParams(
        n=n, common_rate=n / tau, nu=1.0 / inv_nu, mu=1.0 / inv_mu, variant="fixed"
    )


def smoothed_hypoexp(j, tau):
    """Two-moment chain whose common rate j/tau varies continuously in j.

    At integer j every rate equals j/tau and the chain is the exact Erlang
    reduction.  Requires j >= 1: no sum of independent exponentials has
    coefficient of variation above 1.
    """
    _check_positive(j, tau)
    if _is_integer(j):
        b = j / tau
        return ChainParams(n=int(j), common_rate=b, nu=b, mu=b, variant="smoothed")
    if j < 1:
        raise ValueError(
            f"two-moment chain infeasible for shape {j} < 1 "
            "(target coefficient of variation exceeds 1)"
        )
    n = math.ceil(j)
    frac = j - math.floor(j)
    root = math.sqrt(1.0 - frac * frac)
    inv_mu = (tau / (2.0 * j)) * (1.0 + frac + root)
    inv_nu = (tau / (2.0 * j)) * (1.0 + frac - root)
    return ChainParams(
        n=n, common_rate=j / tau, nu=1.0 / inv_nu, mu=1.0 / inv_mu, variant="smoothed"
    )


def regularized_smoothed(j, tau, cfg=None):
    """Smoothed chain with the square root regularized by hbar and the two
    tail residence times pulled together by eps.

    The mean identity survives exactly (the eps terms cancel); the variance
    picks up an O(eps + hbar^2) error.  Rates stay bounded by about
    2 j / (eps tau) near integer j, keeping the chain non-stiff and the
    rates continuously differentiable in j on each open interval.
    """
    _check_positive(j, tau)
    cfg = cfg or ApproxConfig()
    if j < 1:
        raise ValueError(f"two-moment chain infeasible for shape {j} < 1")
    # floor(j) + 1 stages throughout: at integer j this is the limit of the
    # construction from above, which keeps the formulas (and the mean
    # identity) valid without a special case, at the price of one
    # near-instantaneous stage whose rate the eps offset caps.
    n = math.floor(j) + 1
    frac = j - math.floor(j)
    root = math.sqrt(1.0 - frac * frac + cfg.hbar**2)
    inv_mu = (tau / (2.0 * j)) * (1.0 + frac + root - cfg.eps)
    inv_nu = (tau / (2.0 * j)) * (1.0 + frac - root + cfg.eps)
    if inv_nu <= 0 or inv_mu <= 0:
        raise ValueError(
            f"regularized residence times non-positive for shape {j} "
            f"(eps={cfg.eps}, hbar={cfg.hbar})"
        )
    return ChainParams(
        n=n,
        common_rate=j / tau,
        nu=1.0 / inv_nu,
        mu=1.0 / inv_mu,
        variant="smoothed_regularized",
    )


def stiffness_check(params, cfg=None):
    """True when the fastest stage rate exceeds the mean stage rate n/mean
    by the configured factor; such chains need impractically small explicit
    steps."""
    cfg = cfg or ApproxConfig()
    rates = params.rates()
    ratio = max(rates) * params.mean / len(rates)
    return ratio > cfg.stiffness_threshold
