"""Parameter estimation from Type-II censored samples.

Three null families are supported: exponential (closed-form MLE), gamma
(MLE from the censored likelihood equations, solved numerically) and normal
(Gupta's linear estimator with Blom plotting positions).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import optimize, special

from .data import CensoredSample
from .distributions import Family, FamilySpec, as_family, dlog_j_dx, log_j_integral
from .exceptions import ConvergenceError, DegenerateInputError, DomainError, UnsupportedNullError

NULL_FAMILIES = (Family.EXPONENTIAL, Family.GAMMA, Family.NORMAL)

GAMMA_SHAPE_BRACKET = (0.05, 500.0)


@dataclass(frozen=True)
class Estimate:
    family: Family
    params: tuple
    iterations: int = 0
    residual: float = 0.0
    converged: bool = True
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def spec(self) -> FamilySpec:
        return FamilySpec(self.family, self.params)


def _positive(s: CensoredSample):
    if s.values[0] <= 0:
        raise DomainError("observations must be strictly positive")


# ---------------------------------------------------------------------------
# exponential


def exponential_scale(x, n):
    """Censored-sample MLE of the exponential scale, vectorized over rows.

    ``sigma = (sum_j x_j + (n - r) x_r) / r``
    """
    x = np.asarray(x, dtype=float)
    r = x.shape[-1]
    return (x.sum(axis=-1) + (n - r) * x[..., -1]) / r


def estimate_exponential(s: CensoredSample) -> Estimate:
    _positive(s)
    sigma = float(exponential_scale(s.values, s.n))
    return Estimate(Family.EXPONENTIAL, (sigma,))


# ---------------------------------------------------------------------------
# normal


@lru_cache(maxsize=256)
def gupta_coefficients(n: int, r: int):
    """Weights ``(b, c)`` of Gupta's linear estimators of location and scale.

    Expected normal order statistics are replaced by the Blom plotting
    positions ``Phi^-1((j - 0.375) / (n + 0.125))``.  By construction
    ``sum(b) == 1`` and ``sum(c) == 0``.
    """
    if not 2 <= r <= n:
        raise DomainError(f"need 2 <= r <= n, got r={r}, n={n}")
    j = np.arange(1, r + 1)
    m = special.ndtri((j - 0.375) / (n + 0.125))
    d = m - m.mean()
    ss = np.dot(d, d)
    b = 1.0 / r - m.mean() * d / ss
    c = d / ss
    b.setflags(write=False)
    c.setflags(write=False)
    return b, c


def gupta_location_scale(x, n):
    x = np.asarray(x, dtype=float)
    b, c = gupta_coefficients(int(n), x.shape[-1])
    return x @ b, x @ c


def estimate_normal_gupta(s: CensoredSample) -> Estimate:
    mu, sigma = gupta_location_scale(s.values, s.n)
    if not sigma > 0:
        raise DegenerateInputError("zero scale estimate (all observed values equal)")
    return Estimate(Family.NORMAL, (float(mu), float(sigma)))


# ---------------------------------------------------------------------------
# gamma


def gamma_summaries(s: CensoredSample):
    """Return ``(P_r, S_r)``: geometric and arithmetic mean over ``X_{r:n}``."""
    x = s.values
    xr = x[-1]
    return math.exp(np.mean(np.log(x))) / xr, float(np.mean(x)) / xr


def _censored_term(theta, y):
    # exp(-y) / J(theta, y), in log space
    return math.exp(-y - log_j_integral(theta, y))


def _solve_scale(theta, n, r, S):
    """Solve the scale equation for y = x_r / sigma with theta held fixed."""
    top = theta / S
    if n == r:
        return top
    k = (n - r) / r

    def g(logy):
        y = math.exp(logy)
        return y * S - theta + k * _censored_term(theta, y)

    hi = math.log(top)
    lo = hi - 5.0
    while g(lo) >= 0:
        lo -= 5.0
        if lo < hi - 200:
            raise ConvergenceError("cannot bracket the gamma scale equation")
    if g(hi) <= 0:
        return top
    return math.exp(optimize.brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps))


def _shape_equation(theta, n, r, P, S):
    y = _solve_scale(theta, n, r, S)
    val = special.digamma(theta) - math.log(y) - (r / n) * math.log(P)
    if n > r:
        val -= (n - r) / n * dlog_j_dx(theta, y)
    return val, y


def gamma_mle_residuals(theta, sigma, s: CensoredSample):
    """Residuals of the two censored gamma likelihood equations.

    The shape equation is divided by ``n``; the scale equation is divided
    by ``max(1, theta)``.  Both are zero at the MLE.
    """
    n, r = s.n, s.r
    P, S = gamma_summaries(s)
    xr = s.values[-1]
    y = xr / sigma
    eq1 = r * math.log(P) - n * (special.digamma(theta) - math.log(y))
    eq2 = xr * S / sigma - theta
    if n > r:
        eq1 += (n - r) * dlog_j_dx(theta, y)
        eq2 += (n - r) * _censored_term(theta, y) / r
    return eq1 / n, eq2 / max(1.0, theta)


def estimate_gamma(s: CensoredSample, *, max_iter=100) -> Estimate:
    """Censored-sample MLE of gamma shape and scale.

    The scale equation is solved for ``sigma`` at fixed shape (it is
    monotone in ``x_r / sigma``), and the shape equation is then solved in
    the single remaining unknown by Brent's method on a bracket found by
    geometric expansion from a method-of-moments start.

    Raises
    ------
    ConvergenceError
        If no sign change of the shape equation is found inside
        ``GAMMA_SHAPE_BRACKET``; the best iterate is attached.
    """
    _positive(s)
    if s.r < 3:
        raise DomainError("gamma estimation needs r >= 3")
    n, r = s.n, s.r
    P, S = gamma_summaries(s)
    if not (P < 1 and S < 1):
        raise DegenerateInputError("all observed values are equal")
    lo_b, hi_b = GAMMA_SHAPE_BRACKET
    x = s.values
    v = np.var(x, ddof=1)
    theta0 = float(np.clip(np.mean(x) ** 2 / v, lo_b, hi_b)) if v > 0 else 1.0

    evals = 0
    seen = {}

    def f(log_theta):
        nonlocal evals
        evals += 1
        if evals > max_iter:
            raise ConvergenceError("gamma MLE iteration limit reached", best=_best(seen))
        val, y = _shape_equation(math.exp(log_theta), n, r, P, S)
        seen[log_theta] = (val, y)
        return val

    a = math.log(theta0)
    fa = f(a)
    step = math.log(2.0) if fa < 0 else -math.log(2.0)
    b, fb = a, fa
    while np.sign(fb) == np.sign(fa) and fb != 0:
        a, fa = b, fb
        b = min(max(a + step, math.log(lo_b)), math.log(hi_b))
        if b == a:
            raise ConvergenceError(
                "gamma shape equation has no root in the bracket", best=_best(seen)
            )
        fb = f(b)
    lo, hi = sorted((a, b))
    if fb == 0:
        root = b
    else:
        root = optimize.brentq(f, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    theta = math.exp(root)
    val, y = seen.get(root) or _shape_equation(theta, n, r, P, S)
    sigma = float(x[-1] / y)
    e1, e2 = gamma_mle_residuals(theta, sigma, s)
    return Estimate(
        Family.GAMMA,
        (theta, sigma),
        iterations=evals,
        residual=float(max(abs(e1), abs(e2))),
        converged=True,
    )


def _best(seen):
    if not seen:
        return None
    lt, (val, y) = min(seen.items(), key=lambda kv: abs(kv[1][0]))
    return {"theta": math.exp(lt), "y": y, "residual": abs(val)}


# ---------------------------------------------------------------------------


_ESTIMATORS = {
    Family.EXPONENTIAL: estimate_exponential,
    Family.GAMMA: estimate_gamma,
    Family.NORMAL: estimate_normal_gupta,
}


def estimate(family, s: CensoredSample) -> Estimate:
    """Estimate the parameters of a null family from a censored sample."""
    try:
        fam = as_family(family)
        fn = _ESTIMATORS[fam]
    except (KeyError, ValueError):
        raise UnsupportedNullError(
            f"no censored-sample estimator for {family!r}; "
            "supported: exponential, gamma, normal"
        ) from None
    return fn(s)
