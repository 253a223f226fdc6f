"""Goodness-of-fit statistics.

Normality statistics (Cramer-von Mises, Anderson-Darling and the weighted
characteristic-function distance) are evaluated on normal scores produced
by :func:`censgof.transforms.transformation7`.  The direct statistics are
censored-sample versions of W^2 and A^2 applied to the fitted distribution
function at the observed order statistics.

Every statistic rejects for large values.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .data import CensoredSample
from .distributions import Family, as_family
from .exceptions import ConfigurationError, DomainError, UnsupportedNullError

DEFAULT_LEVELS = (0.10, 0.05, 0.01)
DEFAULT_CF_WEIGHT = 0.5


class Statistic(str, enum.Enum):
    W2 = "W2"
    A2 = "A2"
    C2 = "C2"
    DS_W2 = "DS_W2"
    DS_A2 = "DS_A2"

    def __str__(self):
        return self.value

    @property
    def is_direct(self) -> bool:
        return self in (Statistic.DS_W2, Statistic.DS_A2)


TRANSFORMED_STATISTICS = (Statistic.W2, Statistic.A2, Statistic.C2)
DIRECT_STATISTICS = (Statistic.DS_W2, Statistic.DS_A2)
DIRECT_NULLS = (Family.EXPONENTIAL, Family.NORMAL)

_ALIASES = {"CVM": "W2", "W": "W2", "AD": "A2", "A": "A2", "CF": "C2", "C": "C2"}


def as_statistic(name) -> Statistic:
    if isinstance(name, Statistic):
        return name
    key = str(name).strip().upper().replace("-", "_")
    key = _ALIASES.get(key, key)
    try:
        return Statistic(key)
    except ValueError:
        raise ValueError(
            f"unknown statistic {name!r}; choose from W2 (cvm), A2 (ad), C2 (cf), DS_W2, DS_A2"
        ) from None


@dataclass
class GofResult:
    """Outcome of one goodness-of-fit test.

    ``reject[level]`` is true when ``value > critical_values[level]``.
    """

    statistic_name: Statistic
    value: float
    critical_values: dict = field(default_factory=dict)
    p_value: float | None = None
    reject: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        self.statistic_name = as_statistic(self.statistic_name)
        self.value = float(self.value)
        if not math.isfinite(self.value):
            raise DomainError(f"{self.statistic_name} value is not finite")
        if self.critical_values and not self.reject:
            self.reject = {lv: self.value > cv for lv, cv in self.critical_values.items()}


# ---------------------------------------------------------------------------
# statistics on normal scores


def _sorted_scores(z):
    z = np.sort(np.asarray(z, dtype=float), axis=-1)
    if z.ndim == 0 or z.shape[-1] < 1:
        raise DomainError("need at least one score")
    return z


def cvm_statistic(z):
    """Cramer-von Mises ``W^2 = sum (Phi(z_(j)) - (2j-1)/(2r))^2 + 1/(12r)``."""
    z = _sorted_scores(z)
    r = z.shape[-1]
    p = (2 * np.arange(1, r + 1) - 1) / (2 * r)
    return np.sum((special.ndtr(z) - p) ** 2, axis=-1) + 1.0 / (12 * r)


def ad_statistic(z):
    """Anderson-Darling ``A^2``.

    ``-r - (1/r) sum [(2j-1) log Phi(z_(j)) + (2r+1-2j) log(1 - Phi(z_(j)))]``,
    evaluated with ``log_ndtr`` so both tails keep full precision.
    """
    z = _sorted_scores(z)
    r = z.shape[-1]
    k = 2 * np.arange(1, r + 1) - 1
    lo, hi = special.log_ndtr(z), special.log_ndtr(-z)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise DomainError("Phi(z) reached 0 or 1; A^2 is undefined")
    return -r - np.sum(k * lo + (2 * r - k) * hi, axis=-1) / r


def cf_statistic(z, a=DEFAULT_CF_WEIGHT):
    """Weighted L2 distance between the empirical and the normal CF.

    Uses the closed form for the weight ``exp(-a t^2)``::

        (1/r) sqrt(pi/a) sum_jk exp(-(z_j - z_k)^2 / (4a))
        - 2 sqrt(2 pi / (1 + 2a)) sum_j exp(-z_j^2 / (2 + 4a))
        + r sqrt(pi / (1 + a))
    """
    if not a > 0:
        raise DomainError(f"weight must be positive, got a={a}")
    z = np.asarray(z, dtype=float)
    if z.ndim == 0 or z.shape[-1] < 1:
        raise DomainError("need at least one score")
    r = z.shape[-1]
    pair = _pair_sum(z.reshape(-1, r), a).reshape(z.shape[:-1])
    single = np.exp(-(z**2) / (2 + 4 * a)).sum(axis=-1)
    return (
        math.sqrt(math.pi / a) * pair / r
        - 2 * math.sqrt(2 * math.pi / (1 + 2 * a)) * single
        + r * math.sqrt(math.pi / (1 + a))
    )


def _pair_sum(z, a, budget=2_000_000):
    # sum_jk exp(-(z_j - z_k)^2 / (4a)) per row, in blocks to bound memory
    r = z.shape[1]
    step = max(1, budget // (r * r))
    out = np.empty(z.shape[0])
    for s in range(0, z.shape[0], step):
        blk = z[s : s + step]
        d = blk[:, :, None] - blk[:, None, :]
        out[s : s + step] = np.exp(-(d * d) / (4 * a)).sum(axis=(1, 2))
    return out


def normality_statistic(statistic, z, a=DEFAULT_CF_WEIGHT):
    stat = as_statistic(statistic)
    if stat is Statistic.W2:
        return cvm_statistic(z)
    if stat is Statistic.A2:
        return ad_statistic(z)
    if stat is Statistic.C2:
        return cf_statistic(z, a)
    raise ConfigurationError(f"{stat} is not computed from normal scores")


# ---------------------------------------------------------------------------
# direct statistics


def censored_cvm(Z, n):
    """Type-II censored Cramer-von Mises statistic.

    ``Z`` holds the fitted distribution function at the ``r`` observed order
    statistics of a sample of size ``n``; ``Z_r`` is the censoring point::

        sum_i (Z_i - (2i-1)/(2n))^2 + r/(12 n^2) + (n/3)(Z_r - r/n)^3

    This equals ``n * integral_0^{Z_r} (F_n(t) - t)^2 dt``.
    """
    Z = np.asarray(Z, dtype=float)
    r = Z.shape[-1]
    i = np.arange(1, r + 1)
    zr = Z[..., -1]
    return (
        np.sum((Z - (2 * i - 1) / (2 * n)) ** 2, axis=-1)
        + r / (12 * n**2)
        + n / 3 * (zr - r / n) ** 3
    )


def censored_ad(Z, n):
    """Type-II censored Anderson-Darling statistic.

    With ``Z_r`` the censoring point::

        -(1/n) sum (2i-1)(log Z_i - log(1 - Z_i)) - 2 sum log(1 - Z_i)
        - (1/n)[(r-n)^2 log(1 - Z_r) - r^2 log Z_r + n^2 Z_r]

    This equals ``n * integral_0^{Z_r} (F_n(t) - t)^2 / (t(1-t)) dt``.
    """
    Z = np.asarray(Z, dtype=float)
    if np.any((Z <= 0) | (Z >= 1)):
        raise DomainError("fitted probabilities must lie strictly inside (0, 1)")
    r = Z.shape[-1]
    i = np.arange(1, r + 1)
    lz, l1z = np.log(Z), np.log1p(-Z)
    zr = Z[..., -1]
    return (
        -np.sum((2 * i - 1) * (lz - l1z), axis=-1) / n
        - 2 * np.sum(l1z, axis=-1)
        - ((r - n) ** 2 * l1z[..., -1] - r**2 * lz[..., -1] + n**2 * zr) / n
    )


def _check_direct_null(null_family):
    fam = as_family(null_family)
    if fam not in DIRECT_NULLS:
        raise UnsupportedNullError(f"direct statistics are available for exponential and normal nulls, not {fam}")
    return fam


def direct_values_batch(X, n, null_family, eps=1e-12):
    """Direct ``(A^2, W^2)`` for each row of ``X``, plus the success mask."""
    from .transforms import clamp, fitted_uniforms_batch

    fam = _check_direct_null(null_family)
    U, ok = fitted_uniforms_batch(X, n, fam)
    U, _ = clamp(U, eps)
    return censored_ad(U, n), censored_cvm(U, n), ok


def direct_statistics(s: CensoredSample, null_family, critvals=None, levels=DEFAULT_LEVELS):
    """Direct censored A^2 and W^2 for a censored sample.

    Returns
    -------
    (GofResult, GofResult)
        The ``DS_A2`` and ``DS_W2`` results.  Critical values and decisions
        are filled in for each statistic that ``critvals`` covers at the
        sample's ``r``.
    """
    from .transforms import clamp, fitted_uniforms

    fam = _check_direct_null(null_family)
    U, _ = fitted_uniforms(s, fam)
    U, hits = clamp(U)
    notes = [f"{int(hits)} fitted probabilities clamped"] if hits else []
    a2 = float(censored_ad(U, s.n))
    w2 = float(censored_cvm(U, s.n))
    out = []
    for stat, val in ((Statistic.DS_A2, a2), (Statistic.DS_W2, w2)):
        if critvals is not None and critvals.levels_for(stat, s.r):
            out.append(run_test(val, stat, critvals, r=s.r, levels=levels, warnings=list(notes)))
        else:
            out.append(GofResult(stat, val, warnings=list(notes)))
    return tuple(out)


# ---------------------------------------------------------------------------


def run_test(z, statistic, critvals, *, r=None, levels=None, a=DEFAULT_CF_WEIGHT, warnings=None):
    """Evaluate a statistic and compare it with simulated critical values.

    Parameters
    ----------
    z : array_like or float
        Normal scores, or an already computed statistic value (required for
        the direct statistics, in which case ``r`` must be given).
    statistic : Statistic or str
    critvals : CriticalValueTable
    levels : sequence of float, optional
        Defaults to every level the table holds for this statistic and ``r``.
    """
    stat = as_statistic(statistic)
    if np.ndim(z) == 0:
        if r is None:
            raise ConfigurationError("r is required when passing a statistic value")
        value = float(z)
    else:
        z = np.asarray(z, dtype=float)
        if r is not None and r != z.shape[-1]:
            raise ConfigurationError(f"r={r} does not match {z.shape[-1]} scores")
        r = z.shape[-1]
        value = float(normality_statistic(stat, z, a))
    if levels is None:
        levels = critvals.levels_for(stat, r)
    if not levels:
        raise ConfigurationError(f"critical-value table has no entries for {stat} at r={r}")
    cvs = {float(lv): critvals.critical_value(stat, r, lv) for lv in levels}
    return GofResult(
        stat,
        value,
        critical_values=cvs,
        p_value=critvals.p_value(stat, r, value),
        warnings=list(warnings or []),
    )
