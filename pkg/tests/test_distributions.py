import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import gammaincc

from gammadde.distributions import (
    GammaKernel,
    HypoexpKernel,
    Rng,
    gamma_mgf,
    gamma_pdf,
    gamma_survival,
    hypoexp_mgf,
    hypoexp_moments,
    hypoexp_pdf,
    hypoexp_survival,
    regularized_gamma_q,
    sample_equilibrium_gamma,
    sample_gamma,
)

# High-precision values computed with mpmath (30 digits) from the defining
# formulas and integrals.
PDF_2p5_2p5_AT_1 = 0.61020760674693696
SURV_2p5_2p5_AT_1 = 0.41588018699550792
MGF_2p15_AT_M0p1 = 0.65643375296817665


def test_kernel_validation():
    with pytest.raises(ValueError):
        GammaKernel(shape=0.0, rate=1.0)
    with pytest.raises(ValueError):
        GammaKernel(shape=1.0, rate=-2.0)
    with pytest.raises(ValueError):
        HypoexpKernel(rates=())
    with pytest.raises(ValueError):
        HypoexpKernel(rates=(1.0, 0.0))


def test_gamma_moments():
    k = GammaKernel(shape=2.5, rate=0.5)
    assert k.mean == 5.0
    assert k.variance == 10.0


def test_gamma_pdf_values():
    assert gamma_pdf(GammaKernel(1.0, 1.0), 0.0) == 1.0
    assert gamma_pdf(GammaKernel(2.0, 1.0), 1.0) == pytest.approx(math.exp(-1), rel=1e-14)
    assert gamma_pdf(GammaKernel(2.5, 2.5), 1.0) == pytest.approx(PDF_2p5_2p5_AT_1, rel=1e-13)
    assert gamma_pdf(GammaKernel(3.0, 1.0), 0.0) == 0.0
    assert gamma_pdf(GammaKernel(0.5, 1.0), 0.0) == np.inf
    with pytest.raises(ValueError):
        gamma_pdf(GammaKernel(2.0, 1.0), -0.1)


def test_gamma_pdf_normalizes():
    for j, a in [(0.7, 2.0), (2.5, 2.5), (7.3, 0.4)]:
        k = GammaKernel(j, a)
        val, _ = quad(lambda s: gamma_pdf(k, s), 0.0, np.inf, limit=200)
        assert val == pytest.approx(1.0, abs=1e-8)


def test_gamma_survival_values():
    assert gamma_survival(GammaKernel(3.7, 0.2), 0.0) == 1.0
    assert gamma_survival(GammaKernel(1.0, 1.0), 1.0) == pytest.approx(math.exp(-1), rel=1e-13)
    assert gamma_survival(GammaKernel(2.5, 2.5), 1.0) == pytest.approx(SURV_2p5_2p5_AT_1, rel=1e-12)
    with pytest.raises(ValueError):
        gamma_survival(GammaKernel(1.0, 1.0), -1.0)


def test_gamma_survival_monotone():
    k = GammaKernel(2.2, 1.7)
    t = np.linspace(0.0, 12.0, 200)
    s = gamma_survival(k, t)
    assert np.all(np.diff(s) <= 1e-15)
    assert np.all((0.0 <= s) & (s <= 1.0))


def test_incomplete_gamma_against_scipy():
    # Dual route: the series/continued-fraction implementation against
    # scipy's independent one, both sides of the x = s + 1 switch.
    rng = np.random.default_rng(5)
    for _ in range(200):
        s = rng.uniform(0.05, 30.0)
        x = rng.uniform(0.0, 60.0)
        assert regularized_gamma_q(s, x) == pytest.approx(
            float(gammaincc(s, x)), rel=1e-12, abs=1e-300
        )


def test_gamma_mgf():
    assert gamma_mgf(GammaKernel(1.0, 1.0), -1.0) == pytest.approx(0.5, rel=1e-15)
    assert gamma_mgf(GammaKernel(5.3, 0.7), 0.0) == 1.0
    assert gamma_mgf(GammaKernel(2.15, 0.4624), -0.1) == pytest.approx(
        MGF_2p15_AT_M0p1, rel=1e-13
    )
    with pytest.raises(ValueError):
        gamma_mgf(GammaKernel(2.0, 1.0), 1.0)


def test_hypoexp_mgf_and_moments():
    k = HypoexpKernel((1.0, 2.0))
    assert hypoexp_mgf(k, 0.0) == 1.0
    mean, var = hypoexp_moments(k)
    assert mean == 1.5
    assert var == 1.25
    with pytest.raises(ValueError):
        hypoexp_mgf(k, 1.0)


def test_hypoexp_moments_match_mgf_derivatives():
    k = HypoexpKernel((0.8, 2.5, 4.0))
    h = 1e-5
    vals = hypoexp_mgf(k, np.array([-2 * h, -h, 0.0, h, 2 * h]))
    d1 = (vals[3] - vals[1]) / (2 * h)
    d2 = (vals[3] - 2 * vals[2] + vals[1]) / h**2
    mean, var = hypoexp_moments(k)
    assert d1 == pytest.approx(mean, rel=1e-6)
    assert d2 - mean**2 == pytest.approx(var, rel=1e-4)


def test_hypoexp_survival_values():
    assert hypoexp_survival(HypoexpKernel((2.0, 3.0)), 0.0) == 1.0
    t = np.linspace(0.0, 3.0, 7)
    single = hypoexp_survival(HypoexpKernel((1.7,)), t)
    assert np.allclose(single, np.exp(-1.7 * t), atol=1e-12)
    # Distinct rates (1, 2): partial fractions give 2 e^-t - e^-2t.
    assert hypoexp_survival(HypoexpKernel((1.0, 2.0)), 1.0) == pytest.approx(
        2 * math.exp(-1) - math.exp(-2), abs=1e-10
    )


@settings(max_examples=25, deadline=None)
@given(
    st.lists(st.floats(0.2, 8.0), min_size=2, max_size=5, unique=True),
    st.floats(0.05, 4.0),
)
def test_hypoexp_survival_matches_partial_fractions(rates, t):
    # The closed form is only a trustworthy oracle away from coalescing
    # poles, where its weights cancel catastrophically.
    gaps = np.diff(np.sort(rates))
    assume(gaps.size and gaps.min() > 0.1)
    k = HypoexpKernel(tuple(rates))
    r = np.asarray(rates)
    weights = []
    for i in range(len(r)):
        others = np.delete(r, i)
        weights.append(np.prod(others / (others - r[i])))
    closed = float(np.sum(np.asarray(weights) * np.exp(-r * t)))
    assert hypoexp_survival(k, t) == pytest.approx(closed, abs=1e-8)


def test_hypoexp_survival_repeated_rates():
    # Repeated rates coalesce partial-fraction poles; the generator path
    # must still agree with the Erlang closed form.
    k = HypoexpKernel((2.0, 2.0, 2.0))
    g = GammaKernel(3.0, 2.0)
    t = np.array([0.3, 1.0, 2.7])
    assert np.allclose(hypoexp_survival(k, t), gamma_survival(g, t), atol=1e-10)


def test_hypoexp_pdf_is_survival_derivative():
    k = HypoexpKernel((1.3, 3.1, 0.9))
    h = 1e-5
    for t in (0.4, 1.1, 2.5):
        fd = (hypoexp_survival(k, t - h) - hypoexp_survival(k, t + h)) / (2 * h)
        assert hypoexp_pdf(k, t) == pytest.approx(fd, rel=1e-7)


def test_rng_reproducible():
    a = sample_gamma(Rng(7), GammaKernel(2.0, 1.0), size=100)
    b = sample_gamma(Rng(7), GammaKernel(2.0, 1.0), size=100)
    c = sample_gamma(Rng(8), GammaKernel(2.0, 1.0), size=100)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_sample_gamma_mean():
    k = GammaKernel(4.0, 0.8)
    draws = sample_gamma(Rng(11), k, size=100_000)
    se = math.sqrt(k.variance / draws.size)
    assert abs(draws.mean() - 5.0) < 3 * se


def test_equilibrium_sampler_distribution():
    # Kolmogorov distance against the quadrature CDF of survival(t)/mean.
    k = GammaKernel(4.0, 0.8)
    draws = np.sort(sample_equilibrium_gamma(Rng(13), k, size=100_000))
    grid = np.linspace(0.0, draws[-1], 400)
    dens = gamma_survival(k, grid) / k.mean
    cdf_grid = np.concatenate([[0.0], np.cumsum((dens[1:] + dens[:-1]) / 2 * np.diff(grid))])
    cdf_at_draws = np.interp(draws, grid, cdf_grid)
    ecdf = np.arange(1, draws.size + 1) / draws.size
    ks = np.max(np.abs(cdf_at_draws - ecdf))
    assert ks < 0.01


def test_equilibrium_sampler_mean():
    # E[T] = (mean/2)(1 + 1/shape) for the stationary recurrence time,
    # confirmed by quadrature of t * survival(t) / mean.
    k = GammaKernel(4.0, 0.8)
    expected, _ = quad(lambda t: t * gamma_survival(k, t) / k.mean, 0.0, np.inf)
    assert expected == pytest.approx((k.mean / 2) * (1 + 1 / k.shape), rel=1e-9)
    draws = sample_equilibrium_gamma(Rng(17), k, size=100_000)
    var, _ = quad(lambda t: t * t * gamma_survival(k, t) / k.mean, 0.0, np.inf)
    se = math.sqrt((var - expected**2) / draws.size)
    assert abs(draws.mean() - expected) < 3 * se


@settings(max_examples=30, deadline=None)
@given(st.floats(0.3, 15.0), st.floats(0.1, 6.0))
def test_kernel_invariants(j, a):
    gk = GammaKernel(j, a)
    assert gamma_survival(gk, 0.0) == 1.0
    assert gamma_mgf(gk, 0.0) == 1.0
    hk = HypoexpKernel((a, 2 * a))
    assert hypoexp_survival(hk, 0.0) == 1.0
    assert hypoexp_mgf(hk, 0.0) == 1.0
