import math

import numpy as np
import pytest
from scipy import optimize, special, stats

from censgof.data import CensoredSample
from censgof.distributions import parse_family, sample_censored
from censgof.estimators import (
    GAMMA_SHAPE_BRACKET,
    estimate,
    estimate_exponential,
    estimate_gamma,
    estimate_normal_gupta,
    exponential_scale,
    gamma_mle_residuals,
    gupta_coefficients,
    gupta_location_scale,
)
from censgof.exceptions import (
    ConvergenceError,
    DegenerateInputError,
    DomainError,
    ShapeError,
    UnsupportedNullError,
)


def censored_loglik_gamma(theta, sigma, x, n):
    # direct censored log-likelihood, independent of the estimator's equations
    r = x.size
    ll = np.sum(stats.gamma.logpdf(x, theta, scale=sigma))
    return ll + (n - r) * stats.gamma.logsf(x[-1], theta, scale=sigma)


def test_exponential_closed_form_matches_numerical_maximum():
    s = sample_censored(parse_family("exp(2)"), 30, 18, np.random.default_rng(1))
    x, n, r = s.values, s.n, s.r

    def nll(log_sigma):
        sig = math.exp(log_sigma)
        return -(np.sum(stats.expon.logpdf(x, scale=sig)) + (n - r) * stats.expon.logsf(x[-1], scale=sig))

    opt = optimize.minimize_scalar(nll, bracket=(-2, 3), tol=1e-12)
    assert estimate_exponential(s).params[0] == pytest.approx(math.exp(opt.x), rel=1e-6)


def test_exponential_scale_vectorized():
    X = np.sort(np.random.default_rng(2).exponential(size=(5, 8)), axis=1)
    v = exponential_scale(X, 12)
    for row, val in zip(X, v):
        assert estimate_exponential(CensoredSample(row, 12)).params[0] == pytest.approx(val)


def test_exponential_rejects_nonpositive():
    with pytest.raises(DomainError):
        estimate_exponential(CensoredSample([-1.0, 0.5, 1.0], 5))


@pytest.mark.parametrize("n,r", [(40, 20), (100, 75), (10, 10)])
def test_gupta_coefficient_identities(n, r):
    b, c = gupta_coefficients(n, r)
    assert b.sum() == pytest.approx(1.0, abs=1e-12)
    assert c.sum() == pytest.approx(0.0, abs=1e-12)
    m = special.ndtri((np.arange(1, r + 1) - 0.375) / (n + 0.125))
    # unbiased for a location-scale transform of the plotting positions
    assert b @ (3 + 2 * m) == pytest.approx(3.0, abs=1e-12)
    assert c @ (3 + 2 * m) == pytest.approx(2.0, abs=1e-12)
    assert not b.flags.writeable


def test_gupta_matches_least_squares():
    rng = np.random.default_rng(3)
    n, r = 40, 30
    x = np.sort(rng.normal(5, 2, n))[:r]
    m = special.ndtri((np.arange(1, r + 1) - 0.375) / (n + 0.125))
    coef = np.linalg.lstsq(np.column_stack([np.ones(r), m]), x, rcond=None)[0]
    mu, sigma = gupta_location_scale(x, n)
    assert (mu, sigma) == pytest.approx(tuple(coef), rel=1e-12)


def test_normal_equivariance_and_degenerate():
    s = sample_censored(parse_family("normal(0,1)"), 40, 20, np.random.default_rng(4))
    mu, sigma = estimate_normal_gupta(s).params
    t = CensoredSample(3 * s.values - 7, s.n)
    mu2, sigma2 = estimate_normal_gupta(t).params
    assert mu2 == pytest.approx(3 * mu - 7) and sigma2 == pytest.approx(3 * sigma)
    with pytest.raises(DegenerateInputError):
        estimate_normal_gupta(CensoredSample([1.0, 1.0, 1.0], 5))


def test_gamma_full_sample_matches_scipy_fit():
    rng = np.random.default_rng(5)
    for _ in range(10):
        x = np.sort(rng.gamma(rng.uniform(0.5, 6), rng.uniform(0.5, 3), size=60))
        est = estimate_gamma(CensoredSample(x, x.size))
        a, _, scale = stats.gamma.fit(x, floc=0)
        assert est.params == pytest.approx((a, scale), rel=1e-4)


@pytest.mark.parametrize("seed", range(6))
def test_gamma_censored_maximizes_likelihood(seed):
    rng = np.random.default_rng(100 + seed)
    n, r = 60, 35
    x = np.sort(rng.gamma(2.5, 1.5, n))[:r]
    est = estimate_gamma(CensoredSample(x, n))
    res = optimize.minimize(
        lambda p: -censored_loglik_gamma(math.exp(p[0]), math.exp(p[1]), x, n),
        x0=[math.log(2), math.log(1.5)],
        method="Nelder-Mead",
        options=dict(xatol=1e-10, fatol=1e-12, maxiter=5000),
    )
    assert est.params == pytest.approx(tuple(np.exp(res.x)), rel=1e-4)
    assert est.residual < 1e-8
    e1, e2 = gamma_mle_residuals(*est.params, CensoredSample(x, n))
    assert abs(e1) < 1e-8 and abs(e2) < 1e-8


def test_gamma_scale_invariance():
    s = sample_censored(parse_family("gamma(3,1)"), 50, 30, np.random.default_rng(7))
    a = estimate_gamma(s)
    b = estimate_gamma(CensoredSample(s.values * 10, s.n))
    assert b.params[0] == pytest.approx(a.params[0], rel=1e-9)
    assert b.params[1] == pytest.approx(10 * a.params[1], rel=1e-9)


def test_gamma_errors():
    with pytest.raises(DegenerateInputError):
        estimate_gamma(CensoredSample([2.0, 2.0, 2.0], 6))
    with pytest.raises(DomainError):
        estimate_gamma(CensoredSample([1.0, 2.0], 6))
    with pytest.raises(DomainError):
        estimate_gamma(CensoredSample([0.0, 1.0, 2.0], 6))
    # nearly constant data need a shape beyond the bracket
    x = 1 + np.arange(10) * 1e-9
    with pytest.raises(ConvergenceError) as info:
        estimate_gamma(CensoredSample(x, 10))
    assert info.value.best is not None and info.value.best["theta"] <= GAMMA_SHAPE_BRACKET[1] * 1.0001


def test_estimate_dispatch():
    s = CensoredSample([0.5, 1.0, 2.0], 5)
    assert estimate("exp", s).family.value == "exponential"
    with pytest.raises(UnsupportedNullError):
        estimate("weibull", s)


def test_censored_sample_validation():
    with pytest.raises(ShapeError):
        CensoredSample([3.0, 1.0], 4)
    with pytest.raises(ShapeError):
        CensoredSample([1.0, 2.0, 3.0], 2)
    with pytest.raises(ShapeError):
        CensoredSample([1.0, np.inf], 4)
    s = CensoredSample.from_full_sample([5, 1, 3, 2], 2)
    assert s.n == 4 and list(s.values) == [1, 2] and s.censoring_fraction == 0.5
    assert CensoredSample.from_unsorted([2, 1], 3) == CensoredSample([1, 2], 3)
    with pytest.raises(ValueError):
        s.values[0] = 9
