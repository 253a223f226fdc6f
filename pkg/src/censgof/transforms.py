"""Transformations of censored samples to complete uniform and normal samples.

The five transformations-to-uniformity map the first ``r`` order statistics
of a uniform sample of size ``n`` to a complete set of ``r`` uniform order
statistics.  The Chen-Balakrishnan step maps uniforms to standardized normal
scores.  :func:`transformation7` composes estimation, probability integral
transform, one of the five maps and the normal-scores step.

All array functions operate along the last axis, so a ``(B, r)`` array is
processed as ``B`` independent samples.
"""

from __future__ import annotations

import enum
import warnings

import numpy as np
from scipy import special

from .data import CensoredSample
from .distributions import Family, FamilySpec, as_family, beta_tail_cdf, beta_tail_sf, cdf
from .estimators import (
    NULL_FAMILIES,
    estimate,
    estimate_gamma,
    exponential_scale,
    gupta_location_scale,
)
from .exceptions import (
    CensGofError,
    ClampWarning,
    DegenerateInputError,
    DomainError,
    TieWarning,
    UnsupportedNullError,
)

EPS = 1e-12
TIE_JITTER = 1e-10


class TransformKind(str, enum.Enum):
    MS = "MS"
    OS = "OS"
    LHB = "LHB"
    FK1 = "FK1"
    FK2 = "FK2"

    def __str__(self):
        return self.value


def as_transform_kind(kind) -> TransformKind:
    if isinstance(kind, TransformKind):
        return kind
    try:
        return TransformKind(str(kind).strip().upper())
    except ValueError:
        raise ValueError(f"unknown transform {kind!r}; choose from MS, OS, LHB, FK1, FK2") from None


def _as_uniform(U):
    U = np.array(U, dtype=float)
    if U.ndim == 0 or U.shape[-1] < 1:
        raise DomainError("need at least one order statistic")
    if np.any(np.isnan(U)) or np.any((U < 0) | (U > 1)):
        raise DomainError("uniform order statistics must lie in [0, 1]")
    if np.any(np.diff(U, axis=-1) < 0):
        raise DomainError("uniform order statistics must be sorted ascending")
    return U


def repair_ties(U, jitter=TIE_JITTER):
    """Separate tied consecutive values by nudging the later one upward.

    Returns the repaired array and the number of values moved.
    """
    U = np.array(U, dtype=float)
    d = np.diff(U, axis=-1)
    if not np.any(d <= 0):
        return U, 0
    moved = 0
    flat = U.reshape(-1, U.shape[-1])
    for row in flat:
        for j in range(1, row.size):
            if row[j] <= row[j - 1]:
                row[j] = row[j - 1] + jitter
                moved += 1
    return flat.reshape(U.shape), moved


def _prepare(U, need_below_one=False, need_above_zero=False):
    U = _as_uniform(U)
    U, moved = repair_ties(U)
    if moved:
        warnings.warn(f"{moved} tied order statistic(s) jittered by {TIE_JITTER:g}", TieWarning, stacklevel=3)
    if need_below_one and np.any(U >= 1):
        raise DegenerateInputError("order statistic equal to 1")
    if need_above_zero and np.any(U <= 0):
        raise DegenerateInputError("order statistic equal to 0")
    return U


def _log_spacing_ratios(U):
    # log[(1 - U_j) / (1 - U_{j-1})], with U_0 = 0
    log_surv = np.log1p(-U)
    prev = np.concatenate([np.zeros(U.shape[:-1] + (1,)), log_surv[..., :-1]], axis=-1)
    return log_surv - prev


def ms_transform(U, n):
    """Michael-Schucany map: ``u_i = U_i / U_r * B_{r,n-r+1}(U_r)^(1/r)``."""
    U = _prepare(U)
    r = U.shape[-1]
    Ur = U[..., -1:]
    if np.any(Ur <= 0):
        raise DegenerateInputError("largest observed order statistic is 0")
    B = beta_tail_cdf(r, n, Ur)
    return U / Ur * B ** (1.0 / r)


def os_transform(U, n):
    """O'Reilly-Stephens map.

    ``u_i = 1 - prod_{j<=i} [(1 - U_j) / (1 - U_{j-1})]^((n-j+1)/(r-j+1))``
    """
    U = _prepare(U, need_below_one=True)
    r = U.shape[-1]
    j = np.arange(1, r + 1)
    return -np.expm1(np.cumsum(_log_spacing_ratios(U) * (n - j + 1) / (r - j + 1), axis=-1))


def lhb_transform(U, n):
    """Lin-Huang-Balakrishnan map: sorted ``[(1 - U_i)/(1 - U_{i-1})]^(n-i+1)``."""
    U = _prepare(U, need_below_one=True)
    r = U.shape[-1]
    j = np.arange(1, r + 1)
    return np.sort(np.exp(_log_spacing_ratios(U) * (n - j + 1)), axis=-1)


def fk1_transform(U, n):
    """First Fischer-Kamps map.

    ``u_i = prod_{j=i}^{r} [1 - ((1 - U_j)/(1 - U_{j-1}))^(n-j+1)]^(1/j)``
    """
    U = _prepare(U, need_below_one=True)
    r = U.shape[-1]
    j = np.arange(1, r + 1)
    with np.errstate(divide="ignore"):
        factors = np.log(-np.expm1(_log_spacing_ratios(U) * (n - j + 1))) / j
    if not np.all(np.isfinite(factors)):
        raise DegenerateInputError("zero bracket in the Fischer-Kamps product")
    return np.exp(np.flip(np.cumsum(np.flip(factors, -1), axis=-1), -1))


def fk2_transform(U, n):
    """Second Fischer-Kamps map.

    ``u_i = 1 - [1 - B(U_r)]^(1/r) prod_{j=2}^{i} [1 - (U_{r-j+1}/U_{r-j+2})^(r-j+1)]^(1/(r-j+1))``

    The product is empty (equal to one) for ``i = 1``.
    """
    U = _prepare(U, need_above_zero=True)
    r = U.shape[-1]
    with np.errstate(divide="ignore"):
        lead = np.log(beta_tail_sf(r, n, U[..., -1:])) / r
    if r == 1:
        return -np.expm1(lead)
    k = np.arange(r - 1, 0, -1)  # r - j + 1 for j = 2..r
    log_ratio = np.log(U[..., k - 1]) - np.log(U[..., k])
    with np.errstate(divide="ignore"):
        factors = np.log(-np.expm1(log_ratio * k)) / k
    logs = np.concatenate([lead, lead + np.cumsum(factors, axis=-1)], axis=-1)
    if not np.all(np.isfinite(logs)):
        raise DegenerateInputError("zero bracket in the Fischer-Kamps product")
    return -np.expm1(logs)


TRANSFORMS = {
    TransformKind.MS: ms_transform,
    TransformKind.OS: os_transform,
    TransformKind.LHB: lhb_transform,
    TransformKind.FK1: fk1_transform,
    TransformKind.FK2: fk2_transform,
}


def apply_transform(kind, U, n):
    return TRANSFORMS[as_transform_kind(kind)](U, n)


# ---------------------------------------------------------------------------


def clamp(u, eps=EPS):
    """Clamp into ``[eps, 1 - eps]``; return the array and a per-row count."""
    u = np.asarray(u, dtype=float)
    out = np.clip(u, eps, 1.0 - eps)
    hits = np.count_nonzero(out != u, axis=-1)
    return out, hits


def make_strict(u):
    """Make each row strictly increasing by minimal upward nudges."""
    u = np.array(u, dtype=float)
    if u.shape[-1] < 2 or not np.any(np.diff(u, axis=-1) <= 0):
        return u
    for j in range(1, u.shape[-1]):
        u[..., j] = np.maximum(u[..., j], np.nextafter(u[..., j - 1], 2.0))
    return u


def chen_balakrishnan(u, eps=EPS):
    """Normal scores ``z = (Y - mean(Y)) / sd(Y)`` with ``Y = Phi^-1(u)``.

    ``u`` is clamped into ``[eps, 1 - eps]`` first (with a
    :class:`ClampWarning`); the standard deviation uses divisor ``r - 1``.
    """
    u, hits = clamp(u, eps)
    if np.any(hits):
        warnings.warn(f"{int(np.sum(hits))} value(s) clamped into [{eps:g}, 1-{eps:g}]", ClampWarning, stacklevel=2)
    z, ok = _standardize(special.ndtri(u))
    if not np.all(ok):
        raise DegenerateInputError("normal scores have zero sample variance")
    return z


def _standardize(y):
    if y.shape[-1] < 2:
        raise DomainError("need r >= 2 values to standardize")
    mean = y.mean(axis=-1, keepdims=True)
    sd = y.std(axis=-1, ddof=1, keepdims=True)
    ok = sd[..., 0] > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (y - mean) / np.where(sd > 0, sd, 1.0)
    return z, ok


# ---------------------------------------------------------------------------


def _check_null(null_family):
    fam = as_family(null_family)
    if fam not in NULL_FAMILIES:
        raise UnsupportedNullError(f"{fam} is not a supported null family")
    return fam


def fitted_uniforms(s: CensoredSample, null_family):
    """Estimate the null parameters and return ``(Uhat, estimate)``."""
    est = estimate(_check_null(null_family), s)
    return cdf(est.spec, s.values), est


def transformation7(s: CensoredSample, null_family, kind, eps=EPS):
    """Normal scores of a censored sample under a null family.

    Estimates the null parameters from the censored sample, applies the
    fitted distribution function, maps the result through the chosen
    transformation-to-uniformity and finally through
    :func:`chen_balakrishnan`.  Errors carry the failing step on
    ``err.stage`` (``"estimate"``, ``"transform"`` or ``"normal_scores"``).
    """
    kind = as_transform_kind(kind)
    fam = _check_null(null_family)
    try:
        Uhat, _ = fitted_uniforms(s, fam)
    except CensGofError as err:
        err.stage = "estimate"
        raise
    Uhat, hits = clamp(Uhat, eps)
    try:
        u = TRANSFORMS[kind](Uhat, s.n)
    except CensGofError as err:
        err.stage = "transform"
        raise
    u, more = clamp(make_strict(u), eps)
    u = make_strict(u)
    if hits + more:
        warnings.warn(
            f"{int(hits + more)} probability value(s) clamped into [{eps:g}, 1-{eps:g}]",
            ClampWarning,
            stacklevel=2,
        )
    try:
        return chen_balakrishnan(u, eps)
    except CensGofError as err:
        err.stage = "normal_scores"
        raise


def fitted_uniforms_batch(X, n, null_family):
    """Vectorized estimation and probability transform over rows of ``X``.

    Returns ``(Uhat, ok)`` where ``ok`` flags rows whose estimate succeeded.
    """
    fam = _check_null(null_family)
    X = np.asarray(X, dtype=float)
    ok = np.ones(X.shape[0], dtype=bool)
    if fam is Family.EXPONENTIAL:
        sigma = exponential_scale(X, n)
        ok &= (sigma > 0) & (X[:, 0] > 0)
        s = np.where(ok, sigma, 1.0)[:, None]
        U = -np.expm1(-np.maximum(X, 0.0) / s)
    elif fam is Family.NORMAL:
        mu, sigma = gupta_location_scale(X, n)
        ok &= sigma > 0
        U = special.ndtr((X - mu[:, None]) / np.where(ok, sigma, 1.0)[:, None])
    else:
        U = np.empty_like(X)
        for i, row in enumerate(X):
            try:
                est = estimate_gamma(CensoredSample(row, n))
            except CensGofError:
                ok[i] = False
                U[i] = 0.5
                continue
            U[i] = cdf(est.spec, row)
    return U, ok


def normal_scores_batch(Uhat, n, kinds, eps=EPS):
    """Apply each transformation and the normal-scores step to rows of ``Uhat``.

    Returns ``({kind: z}, ok, clamp_counts)``.  Warnings are not emitted;
    counts are returned instead.
    """
    Uhat, hits = clamp(Uhat, eps)
    Uhat, _ = repair_ties(Uhat)
    ok = np.ones(Uhat.shape[0], dtype=bool)
    out = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TieWarning)
        for kind in kinds:
            kind = as_transform_kind(kind)
            u = TRANSFORMS[kind](Uhat, n)
            u = np.where(np.isfinite(u), u, 0.5)
            u, more = clamp(make_strict(u), eps)
            hits = hits + more
            z, good = _standardize(special.ndtri(make_strict(u)))
            ok &= good
            out[kind] = z
    return out, ok, hits
