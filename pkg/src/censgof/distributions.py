"""Parametric families used as null hypotheses and alternatives.

Every family is identified by a :class:`Family` member and a tuple of
parameters; :class:`FamilySpec` bundles the two and validates the parameter
domain.  The module-level functions ``cdf``, ``quantile``, ``density`` and
``sample`` dispatch on the family and broadcast over array arguments.

Parameter conventions
---------------------
=================  ==========================  =============================
family             params                      meaning
=================  ==========================  =============================
exponential        (sigma,)                    scale
gamma              (theta, sigma)              shape, scale
normal             (mu, sigma)                 mean, standard deviation
weibull            (alpha, beta)               shape, scale
inverse_gaussian   (mu, lam)                   mean, shape
loggamma           (alpha, beta)               shape, rate of log(X)
logistic           (alpha, beta)               location, scale
lognormal          (mu, sigma)                 mean, sd of log(X)
student_t          (m,)                        degrees of freedom
=================  ==========================  =============================
"""

from __future__ import annotations

import enum
import math
import re
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .exceptions import (
    DegenerateInputError,
    DomainError,
    ParameterDomainError,
    ShapeError,
    TieWarning,
)


class Family(str, enum.Enum):
    EXPONENTIAL = "exponential"
    GAMMA = "gamma"
    NORMAL = "normal"
    WEIBULL = "weibull"
    INVERSE_GAUSSIAN = "inverse_gaussian"
    LOGGAMMA = "loggamma"
    LOGISTIC = "logistic"
    LOGNORMAL = "lognormal"
    STUDENT_T = "student_t"

    def __str__(self):
        return self.value


_ARITY = {
    Family.EXPONENTIAL: 1,
    Family.STUDENT_T: 1,
}

_ALIASES = {
    "exp": Family.EXPONENTIAL,
    "exponential": Family.EXPONENTIAL,
    "gamma": Family.GAMMA,
    "norm": Family.NORMAL,
    "normal": Family.NORMAL,
    "n": Family.NORMAL,
    "wei": Family.WEIBULL,
    "weibull": Family.WEIBULL,
    "ig": Family.INVERSE_GAUSSIAN,
    "invgauss": Family.INVERSE_GAUSSIAN,
    "inverse_gaussian": Family.INVERSE_GAUSSIAN,
    "lgamma": Family.LOGGAMMA,
    "loggamma": Family.LOGGAMMA,
    "logistic": Family.LOGISTIC,
    "l": Family.LOGISTIC,
    "ln": Family.LOGNORMAL,
    "lognormal": Family.LOGNORMAL,
    "t": Family.STUDENT_T,
    "student_t": Family.STUDENT_T,
}

_SHORT = {
    Family.EXPONENTIAL: "exp",
    Family.GAMMA: "gamma",
    Family.NORMAL: "normal",
    Family.WEIBULL: "wei",
    Family.INVERSE_GAUSSIAN: "ig",
    Family.LOGGAMMA: "lgamma",
    Family.LOGISTIC: "logistic",
    Family.LOGNORMAL: "ln",
    Family.STUDENT_T: "t",
}


def as_family(family) -> Family:
    """Coerce a name or alias (``"exp"``, ``"ln"``, ...) to a :class:`Family`."""
    if isinstance(family, Family):
        return family
    try:
        return _ALIASES[str(family).strip().lower()]
    except KeyError:
        raise ParameterDomainError(f"unknown family {family!r}") from None


@dataclass(frozen=True)
class FamilySpec:
    """A parametric family together with its parameter values."""

    family: Family
    params: tuple

    def __post_init__(self):
        fam = as_family(self.family)
        object.__setattr__(self, "family", fam)
        params = tuple(float(p) for p in np.atleast_1d(self.params))
        object.__setattr__(self, "params", params)
        arity = _ARITY.get(fam, 2)
        if len(params) != arity:
            raise ParameterDomainError(
                f"{fam} takes {arity} parameter(s), got {len(params)}"
            )
        if not all(math.isfinite(p) for p in params):
            raise ParameterDomainError(f"{fam} parameters must be finite")
        _check_domain(fam, params)

    @property
    def label(self) -> str:
        """Short label such as ``gamma(4,1)``, parseable by :func:`parse_family`."""
        vals = ",".join(f"{p:g}" for p in self.params)
        return f"{_SHORT[self.family]}({vals})"

    def __str__(self):
        return self.label


def _check_domain(fam, p):
    positive = {
        Family.EXPONENTIAL: (0,),
        Family.GAMMA: (0, 1),
        Family.NORMAL: (1,),
        Family.WEIBULL: (0, 1),
        Family.INVERSE_GAUSSIAN: (0, 1),
        Family.LOGGAMMA: (0, 1),
        Family.LOGISTIC: (1,),
        Family.LOGNORMAL: (1,),
        Family.STUDENT_T: (0,),
    }[fam]
    for i in positive:
        if not p[i] > 0:
            raise ParameterDomainError(f"{fam} parameter #{i + 1} must be > 0, got {p[i]}")


_SPEC_RE = re.compile(r"^\s*([A-Za-z_]+)\s*(?:\(([^)]*)\))?\s*$")


def parse_family(text: str) -> FamilySpec:
    """Parse labels like ``"gamma(4,1)"``, ``"exp(1)"`` or ``"t(2)"``."""
    m = _SPEC_RE.match(text)
    if not m:
        raise ParameterDomainError(f"cannot parse family spec {text!r}")
    fam = as_family(m.group(1))
    if m.group(2) is None or not m.group(2).strip():
        params = {Family.EXPONENTIAL: (1.0,), Family.NORMAL: (0.0, 1.0)}.get(fam)
        if params is None:
            raise ParameterDomainError(f"{fam} needs explicit parameters")
    else:
        try:
            params = tuple(float(v) for v in m.group(2).split(","))
        except ValueError:
            raise ParameterDomainError(f"cannot parse parameters in {text!r}") from None
    return FamilySpec(fam, params)


# ---------------------------------------------------------------------------
# special functions


def beta_tail_cdf(r, n, u):
    """Beta(r, n-r+1) distribution function, written as a binomial tail.

    ``B(u) = sum_{k=r}^{n} C(n,k) u^k (1-u)^(n-k)``, which equals the
    regularized incomplete beta function ``I_u(r, n-r+1)``.

    For ``n <= 64`` the sum is evaluated exactly in log space; above that
    the incomplete beta function is used.
    """
    r, n = _check_rn(r, n)
    u = _check_unit(u)
    if n > 64:
        return special.betainc(r, n - r + 1, u)
    return np.exp(_log_binom_sum(n, np.arange(r, n + 1), u))


def beta_tail_sf(r, n, u):
    """Complement ``1 - beta_tail_cdf(r, n, u)`` without cancellation."""
    r, n = _check_rn(r, n)
    u = _check_unit(u)
    if n > 64:
        return special.betainc(n - r + 1, r, 1.0 - u)
    return np.exp(_log_binom_sum(n, np.arange(0, r), u))


def _check_rn(r, n):
    r, n = int(r), int(n)
    if not 1 <= r <= n:
        raise DomainError(f"need 1 <= r <= n, got r={r}, n={n}")
    return r, n


def _check_unit(u):
    u = np.asarray(u, dtype=float)
    if np.any((u < 0) | (u > 1)) or np.any(np.isnan(u)):
        raise DomainError("u must lie in [0, 1]")
    return u


def _log_binom_sum(n, ks, u):
    u = np.asarray(u, dtype=float)[..., None]
    logc = special.gammaln(n + 1) - special.gammaln(ks + 1) - special.gammaln(n - ks + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = logc + special.xlogy(ks, u) + special.xlog1py(n - ks, -u)
    return special.logsumexp(terms, axis=-1)


def upper_incomplete_gamma(x, y):
    """Non-regularized upper incomplete gamma ``Gamma(x, y)``."""
    return np.exp(log_upper_incomplete_gamma(x, y))


def log_upper_incomplete_gamma(x, y):
    x = float(x)
    y = float(y)
    if not (x > 0 and y >= 0):
        raise DomainError(f"need x > 0 and y >= 0, got x={x}, y={y}")
    if y == 0:
        return special.gammaln(x)
    q = special.gammaincc(x, y)
    if q > 1e-280:
        return special.gammaln(x) + math.log(q)
    # deep tail: integrate in log space
    return x * math.log(y) + _log_j_quad(x, y)[0]


def j_integral(x, y):
    """``J(x, y) = int_1^inf t^(x-1) exp(-y t) dt`` for ``x > 0``, ``y > 0``."""
    val = math.exp(log_j_integral(x, y))
    if not math.isfinite(val):
        raise DomainError(f"J({x}, {y}) is not representable; use log_j_integral")
    return val


def log_j_integral(x, y):
    x = float(x)
    y = float(y)
    if not (x > 0 and y > 0):
        raise DomainError(f"need x > 0 and y > 0, got x={x}, y={y}")
    q = special.gammaincc(x, y)
    if q > 1e-280:
        return special.gammaln(x) + math.log(q) - x * math.log(y)
    return _log_j_quad(x, y)[0]


def dlog_j_dx(x, y):
    """Partial derivative of ``log J(x, y)`` with respect to ``x``.

    Evaluated as ``int t^(x-1) log(t) e^(-yt) dt / J(x, y)`` with both
    integrals computed by the same scaled quadrature.
    """
    x = float(x)
    y = float(y)
    if not (x > 0 and y > 0):
        raise DomainError(f"need x > 0 and y > 0, got x={x}, y={y}")
    return _log_j_quad(x, y, with_log_moment=True)[1]


def _log_j_quad(x, y, with_log_moment=False):
    # integrand t^(x-1) e^(-y t) scaled by its maximum over [1, inf)
    tstar = max(1.0, (x - 1.0) / y)
    c = (x - 1.0) * math.log(tstar) - y * tstar

    def f(t):
        return math.exp((x - 1.0) * math.log(t) - y * t - c)

    def g(t):
        return math.log(t) * f(t)

    width = math.sqrt(max(x - 1.0, 1.0)) / y
    pieces = [1.0, tstar] if tstar > 1.0 else [1.0]
    pieces.append(pieces[-1] + 10.0 * width)
    opts = dict(epsabs=0.0, epsrel=1e-12, limit=200)
    j0 = sum(integrate.quad(f, a, b, **opts)[0] for a, b in zip(pieces, pieces[1:]))
    j0 += integrate.quad(f, pieces[-1], np.inf, **opts)[0]
    if not j0 > 0:
        raise DomainError(f"J({x}, {y}) underflows even in log space")
    logj = c + math.log(j0)
    if not with_log_moment:
        return logj, None
    j1 = sum(integrate.quad(g, a, b, **opts)[0] for a, b in zip(pieces, pieces[1:]))
    j1 += integrate.quad(g, pieces[-1], np.inf, **opts)[0]
    return logj, j1 / j0


# ---------------------------------------------------------------------------
# distribution functions


def cdf(spec: FamilySpec, x):
    """Distribution function, broadcasting over ``x``.

    Outside the support the value is 0 or 1 as appropriate.
    """
    fam, p = spec.family, spec.params
    x = np.asarray(x, dtype=float)
    if fam is Family.EXPONENTIAL:
        return -np.expm1(-np.maximum(x, 0.0) / p[0])
    if fam is Family.GAMMA:
        return special.gammainc(p[0], np.maximum(x, 0.0) / p[1])
    if fam is Family.NORMAL:
        return special.ndtr((x - p[0]) / p[1])
    if fam is Family.WEIBULL:
        return -np.expm1(-((np.maximum(x, 0.0) / p[1]) ** p[0]))
    if fam is Family.INVERSE_GAUSSIAN:
        return _ig_cdf(x, *p)
    if fam is Family.LOGGAMMA:
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.log(np.maximum(x, 1.0))
        return special.gammainc(p[0], p[1] * g)
    if fam is Family.LOGISTIC:
        return special.expit((x - p[0]) / p[1])
    if fam is Family.LOGNORMAL:
        with np.errstate(divide="ignore"):
            return special.ndtr((np.log(np.maximum(x, 0.0)) - p[0]) / p[1])
    if fam is Family.STUDENT_T:
        return special.stdtr(p[0], x)
    raise AssertionError(fam)


def _ig_cdf(x, mu, lam):
    xp = np.where(x > 0, x, 1.0)
    a = np.sqrt(lam / xp)
    first = special.ndtr(a * (xp / mu - 1.0))
    second = np.exp(2.0 * lam / mu + special.log_ndtr(-a * (xp / mu + 1.0)))
    return np.where(x > 0, np.clip(first + second, 0.0, 1.0), 0.0)


def density(spec: FamilySpec, x):
    fam, p = spec.family, spec.params
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if fam is Family.EXPONENTIAL:
            out = np.exp(-x / p[0]) / p[0]
            return np.where(x >= 0, out, 0.0)
        if fam is Family.GAMMA:
            th, s = p
            out = np.exp(special.xlogy(th - 1, x / s) - x / s - special.gammaln(th)) / s
            return np.where(x > 0, out, 0.0)
        if fam is Family.NORMAL:
            return np.exp(-0.5 * ((x - p[0]) / p[1]) ** 2) / (p[1] * math.sqrt(2 * math.pi))
        if fam is Family.WEIBULL:
            a, b = p
            z = x / b
            out = (a / b) * np.exp(special.xlogy(a - 1, z) - z**a)
            return np.where(x > 0, out, 0.0)
        if fam is Family.INVERSE_GAUSSIAN:
            mu, lam = p
            out = np.sqrt(lam / (2 * math.pi * x**3)) * np.exp(-lam * (x - mu) ** 2 / (2 * mu**2 * x))
            return np.where(x > 0, out, 0.0)
        if fam is Family.LOGGAMMA:
            a, b = p
            lx = np.log(x)
            out = np.exp(
                a * math.log(b) - special.gammaln(a) - (b + 1) * lx + special.xlogy(a - 1, lx)
            )
            return np.where(x > 1, out, 0.0)
        if fam is Family.LOGISTIC:
            z = (x - p[0]) / p[1]
            e = np.exp(-np.abs(z))
            return e / (p[1] * (1 + e) ** 2)
        if fam is Family.LOGNORMAL:
            mu, s = p
            out = np.exp(-((np.log(x) - mu) ** 2) / (2 * s**2)) / (math.sqrt(2 * math.pi) * s * x)
            return np.where(x > 0, out, 0.0)
        if fam is Family.STUDENT_T:
            m = p[0]
            logc = special.gammaln((m + 1) / 2) - special.gammaln(m / 2) - 0.5 * math.log(m * math.pi)
            return np.exp(logc - (m + 1) / 2 * np.log1p(x**2 / m))
    raise AssertionError(fam)


def quantile(spec: FamilySpec, prob):
    """Quantile function; ``prob`` must lie strictly inside (0, 1)."""
    fam, p = spec.family, spec.params
    q = np.asarray(prob, dtype=float)
    if np.any(~((q > 0) & (q < 1))):
        raise DomainError("probabilities must lie in the open interval (0, 1)")
    if fam is Family.EXPONENTIAL:
        return -p[0] * np.log1p(-q)
    if fam is Family.GAMMA:
        return p[1] * special.gammaincinv(p[0], q)
    if fam is Family.NORMAL:
        return p[0] + p[1] * special.ndtri(q)
    if fam is Family.WEIBULL:
        return p[1] * (-np.log1p(-q)) ** (1.0 / p[0])
    if fam is Family.INVERSE_GAUSSIAN:
        return _ig_quantile(q, *p)
    if fam is Family.LOGGAMMA:
        return np.exp(special.gammaincinv(p[0], q) / p[1])
    if fam is Family.LOGISTIC:
        return p[0] + p[1] * special.logit(q)
    if fam is Family.LOGNORMAL:
        return np.exp(p[0] + p[1] * special.ndtri(q))
    if fam is Family.STUDENT_T:
        return special.stdtrit(p[0], q)
    raise AssertionError(fam)


def _ig_quantile(q, mu, lam):
    spec = FamilySpec(Family.INVERSE_GAUSSIAN, (mu, lam))
    q = np.asarray(q, dtype=float)
    shape = q.shape
    q = q.ravel()
    # bracket in log space, then safeguarded Newton
    lo = np.full_like(q, math.log(mu) - 5.0)
    hi = np.full_like(q, math.log(mu) + 5.0)
    for _ in range(200):
        bad = cdf(spec, np.exp(lo)) > q
        if not bad.any():
            break
        lo[bad] -= 5.0
    for _ in range(200):
        bad = cdf(spec, np.exp(hi)) < q
        if not bad.any():
            break
        hi[bad] += 5.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = cdf(spec, np.exp(mid)) < q
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    x = np.exp(0.5 * (lo + hi))
    for _ in range(4):
        f = density(spec, x)
        step = np.where(f > 0, (cdf(spec, x) - q) / np.where(f > 0, f, 1.0), 0.0)
        cand = x - step
        ok = (cand > np.exp(lo)) & (cand < np.exp(hi))
        x = np.where(ok, cand, x)
    return x.reshape(shape)


# ---------------------------------------------------------------------------
# sampling


def _as_rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def sample(spec: FamilySpec, count, rng=None) -> np.ndarray:
    """Draw ``count`` i.i.d. variates (``count`` may be a shape tuple)."""
    rng = _as_rng(rng)
    if np.isscalar(count) and int(count) < 1:
        raise ShapeError("count must be >= 1")
    fam, p = spec.family, spec.params
    if fam is Family.EXPONENTIAL:
        return rng.exponential(p[0], size=count)
    if fam is Family.GAMMA:
        return rng.gamma(p[0], p[1], size=count)
    if fam is Family.NORMAL:
        return rng.normal(p[0], p[1], size=count)
    if fam is Family.WEIBULL:
        return p[1] * rng.weibull(p[0], size=count)
    if fam is Family.INVERSE_GAUSSIAN:
        return _sample_ig(rng, p[0], p[1], count)
    if fam is Family.LOGGAMMA:
        # If G has density b^a g^(a-1) e^(-b g) / Gamma(a), then X = exp(G) has
        # density f_G(log x) / x = b^a (log x)^(a-1) x^-(b+1) / Gamma(a), x > 1,
        # which is the log-gamma density.
        return np.exp(rng.gamma(p[0], 1.0 / p[1], size=count))
    if fam is Family.LOGISTIC:
        return rng.logistic(p[0], p[1], size=count)
    if fam is Family.LOGNORMAL:
        return rng.lognormal(p[0], p[1], size=count)
    if fam is Family.STUDENT_T:
        # normal over sqrt(chi2/m)
        z = rng.standard_normal(size=count)
        v = rng.chisquare(p[0], size=count)
        return z / np.sqrt(v / p[0])
    raise AssertionError(fam)


def _sample_ig(rng, mu, lam, count):
    # transformation with multiple roots: chi-square(1) variate, smaller root,
    # then pick it with probability mu / (mu + x)
    y = rng.standard_normal(size=count) ** 2
    muy = mu * y
    x = mu + mu * muy / (2 * lam) - mu / (2 * lam) * np.sqrt(4 * lam * muy + muy**2)
    u = rng.random(size=count)
    return np.where(u <= mu / (mu + x), x, mu * mu / x)


def sample_censored(spec: FamilySpec, n, r, rng=None):
    """First ``r`` order statistics of ``n`` i.i.d. draws, as a CensoredSample."""
    from .data import CensoredSample

    n, r = int(n), int(r)
    if not 2 <= r <= n:
        raise ShapeError(f"need 2 <= r <= n, got r={r}, n={n}")
    x = np.sort(sample(spec, n, rng))[:r]
    if np.any(np.diff(x) == 0):
        if x[0] == x[-1]:
            raise DegenerateInputError("all observed values are equal")
        warnings.warn("tied order statistics in simulated sample", TieWarning, stacklevel=2)
    return CensoredSample(x, n)


def sample_censored_batch(spec: FamilySpec, n, r, size, rng=None) -> np.ndarray:
    """``(size, r)`` array whose rows are the ``r`` smallest of ``n`` draws."""
    n, r, size = int(n), int(r), int(size)
    if not 2 <= r <= n:
        raise ShapeError(f"need 2 <= r <= n, got r={r}, n={n}")
    x = sample(spec, (size, n), rng)
    if r < n:
        x = np.partition(x, r - 1, axis=1)[:, :r]
    return np.sort(x, axis=1)
