import math
import warnings

import mpmath
import numpy as np
import pytest
from scipy import integrate, stats

from censgof.distributions import (
    Family,
    FamilySpec,
    as_family,
    beta_tail_cdf,
    beta_tail_sf,
    cdf,
    density,
    dlog_j_dx,
    j_integral,
    log_j_integral,
    log_upper_incomplete_gamma,
    parse_family,
    quantile,
    sample,
    sample_censored,
    sample_censored_batch,
)
from censgof.exceptions import DegenerateInputError, DomainError, ParameterDomainError, ShapeError, TieWarning

ALL_SPECS = [
    "exp(2)", "gamma(4,1)", "normal(1,2)", "wei(2,1)", "ig(4,1)", "lgamma(2,1)",
    "logistic(0,1)", "ln(0,1)", "t(2)",
]


def brute_beta_cdf(r, n, u):
    u = mpmath.mpf(u)
    return float(sum(mpmath.binomial(n, k) * u**k * (1 - u) ** (n - k) for k in range(r, n + 1)))


@pytest.mark.parametrize("r,n,u", [(1, 1, 0.3), (2, 4, 0.5), (5, 10, 0.2), (30, 60, 0.55), (50, 100, 0.4), (75, 100, 0.8)])
def test_beta_tail_matches_binomial_sum(r, n, u):
    assert beta_tail_cdf(r, n, u) == pytest.approx(brute_beta_cdf(r, n, u), rel=1e-12)
    assert beta_tail_sf(r, n, u) == pytest.approx(1 - brute_beta_cdf(r, n, u), rel=1e-10, abs=1e-300)


def test_beta_tail_hand_value():
    # B_{2,3}(0.5) = 11/16
    assert beta_tail_cdf(2, 4, 0.5) == pytest.approx(11 / 16, rel=1e-14)


def test_beta_tail_domain():
    with pytest.raises(DomainError):
        beta_tail_cdf(0, 3, 0.5)
    with pytest.raises(DomainError):
        beta_tail_cdf(2, 3, 1.5)


def test_j_integral_against_quadrature():
    for x, y in [(0.5, 0.3), (2.0, 1.0), (4.0, 2.5), (10.0, 0.7)]:
        ref = integrate.quad(lambda t: t ** (x - 1) * math.exp(-y * t), 1, np.inf)[0]
        assert j_integral(x, y) == pytest.approx(ref, rel=1e-9)


def test_log_j_deep_tail_uses_quadrature_consistently():
    # far tail where the regularized function underflows
    # closed forms for integer x: J(3, y) = e^-y (1/y + 2/y^2 + 2/y^3), Gamma(2, y) = (1 + y) e^-y
    y = 800.0
    assert log_j_integral(3.0, y) == pytest.approx(-y + math.log(1 / y + 2 / y**2 + 2 / y**3), rel=1e-12)
    assert log_upper_incomplete_gamma(2.0, 900.0) == pytest.approx(-900 + math.log(901), rel=1e-12)


def test_dlog_j_dx_finite_difference():
    for x, y in [(1.5, 0.8), (4.0, 3.0), (0.7, 0.2)]:
        h = 1e-5
        fd = (log_j_integral(x + h, y) - log_j_integral(x - h, y)) / (2 * h)
        assert dlog_j_dx(x, y) == pytest.approx(fd, rel=1e-6)


@pytest.mark.parametrize("text", ALL_SPECS)
def test_cdf_quantile_roundtrip(text):
    spec = parse_family(text)
    p = np.array([1e-6, 0.01, 0.3, 0.5, 0.9, 0.999])
    x = quantile(spec, p)
    np.testing.assert_allclose(cdf(spec, x), p, rtol=1e-8, atol=1e-12)


@pytest.mark.parametrize("text", ALL_SPECS)
def test_density_is_derivative_of_cdf(text):
    spec = parse_family(text)
    x = quantile(spec, np.array([0.1, 0.4, 0.7]))
    h = 1e-6 * np.maximum(1.0, np.abs(x))
    fd = (cdf(spec, x + h) - cdf(spec, x - h)) / (2 * h)
    np.testing.assert_allclose(density(spec, x), fd, rtol=1e-5)


def test_cdf_matches_scipy():
    x = np.linspace(0.05, 6, 25)
    np.testing.assert_allclose(cdf(parse_family("gamma(4,1)"), x), stats.gamma(4).cdf(x), rtol=1e-12)
    np.testing.assert_allclose(cdf(parse_family("ig(4,1)"), x), stats.invgauss(4, scale=1).cdf(x), rtol=1e-9)
    np.testing.assert_allclose(cdf(parse_family("wei(2,1)"), x), stats.weibull_min(2).cdf(x), rtol=1e-12)
    np.testing.assert_allclose(cdf(parse_family("t(2)"), x - 3), stats.t(2).cdf(x - 3), rtol=1e-10)
    np.testing.assert_allclose(cdf(parse_family("ln(0,1)"), x), stats.lognorm(1).cdf(x), rtol=1e-10)


@pytest.mark.parametrize("text", ALL_SPECS)
def test_samplers_follow_their_cdf(text):
    spec = parse_family(text)
    x = sample(spec, 20_000, np.random.default_rng(11))
    assert stats.kstest(x, lambda v: cdf(spec, v)).pvalue > 1e-3


def test_loggamma_support_above_one():
    x = sample(parse_family("lgamma(2,1)"), 1000, np.random.default_rng(0))
    assert np.all(x > 1)


def test_parse_family_and_labels():
    spec = parse_family("gamma(4,1)")
    assert spec.family is Family.GAMMA and spec.params == (4.0, 1.0)
    assert parse_family(spec.label) == spec
    assert parse_family("exp").params == (1.0,)
    assert as_family("LN") is Family.LOGNORMAL
    with pytest.raises(ParameterDomainError):
        parse_family("gamma(-1,1)")
    with pytest.raises(ParameterDomainError):
        parse_family("gamma(1)")
    with pytest.raises(ParameterDomainError):
        parse_family("cauchy(0,1)")
    with pytest.raises(ParameterDomainError):
        FamilySpec("normal", (0, float("nan")))


def test_sample_censored_shapes_and_batch():
    rng = np.random.default_rng(5)
    s = sample_censored(parse_family("exp(1)"), 20, 10, rng)
    assert s.n == 20 and s.r == 10 and np.all(np.diff(s.values) >= 0)
    X = sample_censored_batch(parse_family("normal(0,1)"), 30, 12, 7, rng)
    assert X.shape == (7, 12) and np.all(np.diff(X, axis=1) >= 0)
    with pytest.raises(ShapeError):
        sample_censored(parse_family("exp(1)"), 5, 6, rng)


def test_batch_rows_are_smallest_order_statistics():
    spec = parse_family("exp(1)")
    a = sample_censored_batch(spec, 15, 6, 4, np.random.default_rng(9))
    full = np.sort(sample(spec, (4, 15), np.random.default_rng(9)), axis=1)[:, :6]
    np.testing.assert_array_equal(a, full)


class _ConstRng:
    def __init__(self, value):
        self.value = value

    def exponential(self, scale, size):
        return np.full(size, self.value)


def test_sample_censored_degenerate(monkeypatch):
    import censgof.distributions as d

    monkeypatch.setattr(d, "_as_rng", lambda rng: rng)
    with pytest.raises(DegenerateInputError):
        sample_censored(parse_family("exp(1)"), 5, 3, _ConstRng(1.0))


def test_sample_censored_tie_warning(monkeypatch):
    import censgof.distributions as d

    class TieRng:
        def exponential(self, scale, size):
            return np.array([1.0, 1.0, 2.0, 3.0])

    monkeypatch.setattr(d, "_as_rng", lambda rng: rng)
    with pytest.warns(TieWarning):
        sample_censored(parse_family("exp(1)"), 4, 3, TieRng())
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        sample_censored(parse_family("exp(1)"), 4, 3, np.random.default_rng(0))
