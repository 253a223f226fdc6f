"""Simulation of the empirical process behind the normal-scores transformation.

For a complete sample ``X_1..X_n`` from a continuous family with true
parameter ``theta0`` the process

    beta_n(t) = n^-1/2 sum_j [ I{Phi(Z_j) <= t} - t ],
    Z_j = (Y_j - mean Y) / s_Y,  Y_j = Phi^-1(F_thetahat(X_j)),

splits exactly into three parts with ``U_j = F_theta0(X_j)``,
``N_j = Phi^-1(U_j)``, ``c_N(t) = Phi(mean N + s_N Phi^-1(t))``,
``c_Y(t) = Phi(mean Y + s_Y Phi^-1(t))`` and
``q(t) = F_theta0(F_thetahat^-1(c_Y(t)))``:

    beta_n1 = n^-1/2 sum_j [ I{U_j <= q} - q - I{U_j <= c_N} + c_N ]
    beta_n2 = n^-1/2 sum_j [ I{U_j <= c_N} - t ]
    beta_n3 = n^1/2 (q - c_N)

For the exponential family the linearizations of ``beta_n3`` around the
true scale (``ring_beta_n3``, with sample moments of ``W_j = dN_j/dsigma``,
and ``tilde_beta_n3``, with their population limits) are also computed.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from ._rng import stream
from .data import CensoredSample
from .distributions import Family, FamilySpec, parse_family, sample
from .estimators import estimate_gamma
from .exceptions import (
    CensGofError,
    ConfigurationError,
    DecompositionError,
    DomainError,
    StudyAbortedError,
    UnsupportedNullError,
)

PROCESSES = ("beta_n", "beta_n1", "beta_n2", "beta_n3", "ring_beta_n3", "tilde_beta_n3")
CURVES_HEADER = ("process", "t", "mean", "sd", "n", "B", "seed")
TRACKED_T = (0.25, 0.5, 0.75)
IDENTITY_TOL = 1e-10
MIN_N = 10
MIN_B = 100
CHUNK = 250


@dataclass(frozen=True)
class ProcessGrid:
    """Equidistant grid ``spacing, 2*spacing, ..., 1 - spacing``."""

    spacing: float = 0.005

    def __post_init__(self):
        if not 0 < self.spacing < 0.5:
            raise ConfigurationError("grid spacing must lie in (0, 0.5)")
        m = 1.0 / self.spacing
        if abs(m - round(m)) > 1e-9:
            raise ConfigurationError("grid spacing must divide 1")

    @property
    def t(self) -> np.ndarray:
        m = int(round(1.0 / self.spacing))
        return np.arange(1, m) / m


@dataclass
class ProcessCurves:
    """Pointwise mean and standard deviation of each simulated process.

    Attributes
    ----------
    t : ndarray
    mean, sd : dict
        Process name -> array over ``t``.
    tracked : dict
        Process name -> ``(B, len(TRACKED_T))`` replicate values at the
        tracked grid points, for covariance estimates.
    identity_error : float
        Largest deviation of ``beta_n - (beta_n1 + beta_n2 + beta_n3)``.
    """

    t: np.ndarray
    mean: dict
    sd: dict
    n: int
    B: int
    family: str
    seed: int
    tracked: dict = field(default_factory=dict)
    failures: int = 0
    identity_error: float = 0.0

    def __eq__(self, other):
        if not isinstance(other, ProcessCurves):
            return NotImplemented
        return (
            np.array_equal(self.t, other.t)
            and self.mean.keys() == other.mean.keys()
            and all(np.array_equal(self.mean[k], other.mean[k]) for k in self.mean)
            and all(np.array_equal(self.sd[k], other.sd[k]) for k in self.sd)
            and (self.n, self.B, self.seed) == (other.n, other.B, other.seed)
        )

    def tracked_covariance(self, process, s, t):
        """Sample covariance of ``process`` between tracked points ``s`` and ``t``."""
        vals = self.tracked[process]
        i, j = TRACKED_T.index(s), TRACKED_T.index(t)
        return float(np.cov(vals[:, i], vals[:, j], ddof=1)[0, 1])


# ---------------------------------------------------------------------------
# closed forms


def durbin_covariance(s, t):
    """Limit covariance of the normal empirical process with estimated mean and scale.

    ``min(s,t) - st - phi(x_s) phi(x_t) - x_s phi(x_s) x_t phi(x_t) / 2`` with
    ``x_u = Phi^-1(u)``.
    """
    s, t = np.asarray(s, dtype=float), np.asarray(t, dtype=float)
    if np.any((s <= 0) | (s >= 1) | (t <= 0) | (t >= 1)):
        raise DomainError("durbin_covariance needs s, t in (0, 1)")
    xs, xt = special.ndtri(s), special.ndtri(t)
    ps, pt = _phi(xs), _phi(xt)
    return np.minimum(s, t) - s * t - ps * pt - 0.5 * xs * ps * xt * pt


def _phi(x):
    return np.exp(-0.5 * np.square(x)) / math.sqrt(2 * math.pi)


@dataclass(frozen=True)
class WConstants:
    """Mean, standard deviation of ``W = dN/dsigma`` and its correlation with ``N``."""

    mu: float
    sigma: float
    rho: float


def _exponential_scale(family: FamilySpec) -> float:
    if family.family is not Family.EXPONENTIAL:
        raise UnsupportedNullError("the linearized processes are implemented for the exponential family only")
    return float(family.params[0])


def exponential_w_constants(sigma0=1.0) -> WConstants:
    """Population constants of ``W = -(X/sigma0^2) exp(-X/sigma0) / phi(N)``.

    With ``N = z`` standard normal, ``W = Phi(-z) log Phi(-z) / (sigma0 phi(z))``,
    so the moments reduce to smooth one-dimensional integrals over ``z``.
    """

    def a(z):  # Phi(-z) log Phi(-z)
        lg = special.log_ndtr(-z)
        return math.exp(lg) * lg

    def sq(z):  # a(z)^2 / phi(z)
        lg = special.log_ndtr(-z)
        if z < -5:
            # -log(1 - p) = p (1 + p/2 + ...) with p = Phi(z)
            log_neg = special.log_ndtr(z) + math.log1p(special.ndtr(z) / 2)
        else:
            log_neg = math.log(-lg)
        return math.exp(2 * lg + 2 * log_neg + 0.5 * z * z) * math.sqrt(2 * math.pi)

    kw = dict(limit=400, epsabs=1e-13, epsrel=1e-12)
    m1 = integrate.quad(a, -np.inf, np.inf, **kw)[0]
    m2 = integrate.quad(sq, -40, 40, points=[0.0], **kw)[0]
    mz = integrate.quad(lambda z: z * a(z), -np.inf, np.inf, **kw)[0]
    var = m2 - m1 * m1
    sd = math.sqrt(var)
    return WConstants(m1 / sigma0, sd / sigma0, mz / sd)


def exponential_w_constants_mc(sigma0=1.0, draws=1_000_000, seed=0) -> WConstants:
    """Monte Carlo estimate of :func:`exponential_w_constants`."""
    rng = stream(seed, "w-constants", 0)
    x = rng.exponential(sigma0, size=draws)
    N = -special.ndtri(np.exp(-x / sigma0))
    W = _w_values(x, N, sigma0)
    return WConstants(float(W.mean()), float(W.std(ddof=1)), float(np.corrcoef(W, N)[0, 1]))


def _w_values(x, N, sigma0):
    # -(x/sigma0^2) exp(-x/sigma0) / phi(N), in log space
    return -np.exp(np.log(x / sigma0**2) - x / sigma0 + 0.5 * N * N + 0.5 * math.log(2 * math.pi))


@dataclass(frozen=True)
class LemmaState:
    """Per-replication sample moments entering the first-order term."""

    n_mean: float | np.ndarray
    n_sd: float | np.ndarray
    w_mean: float | np.ndarray
    w_sd: float | np.ndarray
    corr: float | np.ndarray


def lemma1_g_prime(t, state: LemmaState, family: FamilySpec):
    """Derivative ``g_t'(sigma0)`` of ``F_sigma0(F_sigma^-1(h_t(sigma)))`` (exponential).

    ``g' = h' + (1 - c_N)/sigma0 * (-log(1 - c_N))`` with
    ``h' = phi(mean N + s_N x_t) (mean W + x_t r s_W)`` and ``x_t = Phi^-1(t)``.
    Array-valued ``state`` fields broadcast against ``t``.
    """
    sigma0 = _exponential_scale(family)
    t = np.asarray(t, dtype=float)
    if np.any((t <= 0) | (t >= 1)):
        raise DomainError("t must lie in (0, 1)")
    xt = special.ndtri(t)
    arg = state.n_mean + state.n_sd * xt
    h = _phi(arg) * (state.w_mean + xt * state.corr * state.w_sd)
    log_surv = special.log_ndtr(-arg)  # log(1 - c_N)
    return h - np.exp(log_surv) * log_surv / sigma0


def tilde_h_prime(t, constants: WConstants):
    xt = special.ndtri(np.asarray(t, dtype=float))
    return _phi(xt) * (constants.mu + xt * constants.rho * constants.sigma)


def tilde_g_prime(t, constants: WConstants, family: FamilySpec):
    """``h~'_t + (1 - t)/sigma0 * (-log(1 - t))``."""
    sigma0 = _exponential_scale(family)
    t = np.asarray(t, dtype=float)
    if np.any((t <= 0) | (t >= 1)):
        raise DomainError("t must lie in (0, 1)")
    return tilde_h_prime(t, constants) - (1 - t) * np.log1p(-t) / sigma0


def lemma2_tilde_beta(t, scaled_error, constants: WConstants, family: FamilySpec):
    """``sqrt(n) (sigmahat - sigma0) * g~'_t(sigma0)``.

    ``scaled_error`` may be an array; the result has shape
    ``scaled_error.shape + t.shape``.
    """
    if not constants.sigma > 0:
        raise DomainError("sigma_W must be positive")
    g = tilde_g_prime(t, constants, family)
    return np.multiply.outer(np.asarray(scaled_error, dtype=float), g)


# ---------------------------------------------------------------------------
# simulation


class _Moments:
    # running mean and sum of squared deviations, merged pairwise (Chan et al.)
    def __init__(self, width):
        self.count = 0
        self.mean = np.zeros(width)
        self.m2 = np.zeros(width)

    def add_block(self, values):
        k = values.shape[0]
        if k == 0:
            return
        mean = values.mean(axis=0)
        m2 = np.sum((values - mean) ** 2, axis=0)
        self.merge(k, mean, m2)

    def merge(self, k, mean, m2):
        total = self.count + k
        delta = mean - self.mean
        self.mean = self.mean + delta * (k / total)
        self.m2 = self.m2 + m2 + delta**2 * (self.count * k / total)
        self.count = total

    def sd(self):
        return np.sqrt(self.m2 / (self.count - 1)) if self.count > 1 else np.full_like(self.m2, np.nan)


def _fit(family: FamilySpec, x):
    if family.family is Family.EXPONENTIAL:
        return (float(x.mean()),)
    est = estimate_gamma(CensoredSample(np.sort(x), x.size))
    return est.params


def _cdf_log_survival(family, params, x):
    """``(F(x), log(1 - F(x)))``."""
    if family.family is Family.EXPONENTIAL:
        z = x / params[0]
        return -np.expm1(-z), -z
    sf = special.gammaincc(params[0], x / params[1])
    return special.gammainc(params[0], x / params[1]), np.log(sf)


def _normal_from(family, params, x):
    # Phi^-1(F(x)) evaluated from the upper tail where F is close to one
    F, log_sf = _cdf_log_survival(family, params, x)
    return np.where(F < 0.5, special.ndtri(F), -special.ndtri(np.exp(log_sf)))


def _q(family, theta0, theta_hat, arg):
    """``F_theta0(F_thetahat^-1(Phi(arg)))``."""
    if family.family is Family.EXPONENTIAL:
        return -np.expm1(theta_hat[0] / theta0[0] * special.log_ndtr(-arg))
    x = theta_hat[1] * special.gammaincinv(theta_hat[0], special.ndtr(arg))
    return special.gammainc(theta0[0], x / theta0[1])


def _replicate(family, n, rng, independent):
    x = sample(family, n, rng)
    theta_hat = _fit(family, x)
    if independent:
        N = rng.standard_normal(n)
    else:
        N = _normal_from(family, family.params, x)
    Y = _normal_from(family, theta_hat, x)
    return x, theta_hat, N, Y


def _run_chunk(job):
    family, n, seed, start, stop, t, independent, with_lemmas, constants = job
    sqn = math.sqrt(n)
    xt = special.ndtri(t)
    tag = f"process:{family.label}:n={n}:{'independent' if independent else 'coupled'}"
    rows = {p: [] for p in PROCESSES if with_lemmas or not p.endswith("_beta_n3")}
    failures = 0
    err = 0.0
    for i in range(start, stop):
        try:
            x, theta_hat, N, Y = _replicate(family, n, stream(seed, tag, i), independent)
        except CensGofError:
            try:
                x, theta_hat, N, Y = _replicate(family, n, stream(seed, tag + ":redraw", i), independent)
            except CensGofError:
                failures += 1
                continue
        U = np.sort(_cdf_log_survival(family, family.params, x)[0])
        ybar, sy = Y.mean(), Y.std(ddof=1)
        nbar, sn = N.mean(), N.std(ddof=1)
        pz = np.sort(special.ndtr((Y - ybar) / sy))
        c_n = special.ndtr(nbar + sn * xt)
        q = _q(family, family.params, theta_hat, ybar + sy * xt)
        cnt_z = np.searchsorted(pz, t, side="right")
        cnt_c = np.searchsorted(U, c_n, side="right")
        cnt_q = np.searchsorted(U, q, side="right")
        b = (cnt_z - n * t) / sqn
        b1 = (cnt_q - n * q - cnt_c + n * c_n) / sqn
        b2 = (cnt_c - n * t) / sqn
        b3 = sqn * (q - c_n)
        err = max(err, float(np.max(np.abs(b - (b1 + b2 + b3)))))
        rows["beta_n"].append(b)
        rows["beta_n1"].append(b1)
        rows["beta_n2"].append(b2)
        rows["beta_n3"].append(b3)
        if with_lemmas:
            sigma0 = family.params[0]
            scaled = sqn * (theta_hat[0] - sigma0)
            W = _w_values(x, _normal_from(family, family.params, x), sigma0)
            state = LemmaState(nbar, sn, W.mean(), W.std(ddof=1), np.corrcoef(W, N)[0, 1])
            rows["ring_beta_n3"].append(scaled * lemma1_g_prime(t, state, family))
            rows["tilde_beta_n3"].append(lemma2_tilde_beta(t, scaled, constants, family))
    stats = {}
    for p, vals in rows.items():
        arr = np.array(vals).reshape(len(vals), t.size)
        mean = arr.mean(axis=0) if len(vals) else np.zeros(t.size)
        stats[p] = (len(vals), mean, np.sum((arr - mean) ** 2, axis=0))
    tracked_idx = [int(np.argmin(np.abs(t - s))) for s in TRACKED_T]
    tracked = {p: np.array(vals).reshape(len(vals), t.size)[:, tracked_idx] for p, vals in rows.items()}
    return stats, tracked, failures, err


def simulate_decomposition(
    family,
    n,
    B,
    grid: ProcessGrid | None = None,
    seed=0,
    independent_normals=False,
    workers=None,
) -> ProcessCurves:
    """Simulate the process and its three-part decomposition ``B`` times.

    Parameters
    ----------
    family : FamilySpec or str
        Exponential or gamma; the true parameter is ``family.params``.  The
        linearized processes are added for the exponential family.
    n, B : int
        Sample size (at least 10) and number of replications (at least 100).
    independent_normals : bool
        Replace ``N_j`` by standard normals independent of the sample.

    Raises
    ------
    DecompositionError
        If the decomposition identity is violated by more than 1e-10.
    """
    family = family if isinstance(family, FamilySpec) else parse_family(family)
    if family.family not in (Family.EXPONENTIAL, Family.GAMMA):
        raise UnsupportedNullError("process simulation supports the exponential and gamma families")
    n, B = int(n), int(B)
    if n < MIN_N:
        raise ConfigurationError(f"n must be at least {MIN_N}")
    if B < MIN_B:
        raise ConfigurationError(f"B must be at least {MIN_B}")
    grid = grid or ProcessGrid()
    t = grid.t
    with_lemmas = family.family is Family.EXPONENTIAL
    constants = exponential_w_constants(family.params[0]) if with_lemmas else None
    jobs = [
        (family, n, int(seed), s, min(s + CHUNK, B), t, independent_normals, with_lemmas, constants)
        for s in range(0, B, CHUNK)
    ]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_chunk, jobs))
    else:
        results = [_run_chunk(j) for j in jobs]

    names = [p for p in PROCESSES if with_lemmas or not p.endswith("_beta_n3")]
    acc = {p: _Moments(t.size) for p in names}
    tracked = {p: [] for p in names}
    failures, err = 0, 0.0
    for stats, trk, f, e in results:
        failures += f
        err = max(err, e)
        for p in names:
            k, mean, m2 = stats[p]
            if k:
                acc[p].merge(k, mean, m2)
            tracked[p].append(trk[p])
    if failures > 0.01 * B:
        raise StudyAbortedError(f"{failures} of {B} replications failed")
    if err > IDENTITY_TOL:
        raise DecompositionError(f"decomposition identity violated by {err:.3g}")
    return ProcessCurves(
        t=t,
        mean={p: acc[p].mean for p in names},
        sd={p: acc[p].sd() for p in names},
        n=n,
        B=B,
        family=family.label,
        seed=int(seed),
        tracked={p: np.concatenate(tracked[p]) for p in names},
        failures=failures,
        identity_error=err,
    )


# ---------------------------------------------------------------------------
# I/O


def emit_curves(curves: ProcessCurves, path, comments=None):
    """Write curves as CSV (``process,t,mean,sd,n,B,seed``) with ``repr`` precision."""
    with open(path, "w", newline="") as fh:
        meta = {"family": curves.family, "n": curves.n, "B": curves.B, "seed": curves.seed,
                "failures": curves.failures, **(comments or {})}
        for k, v in meta.items():
            fh.write(f"# {k} = {v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVES_HEADER)
        for p in curves.mean:
            for t, m, s in zip(curves.t, curves.mean[p], curves.sd[p]):
                w.writerow([p, repr(float(t)), repr(float(m)), repr(float(s)), curves.n, curves.B, curves.seed])


def read_curves(path) -> ProcessCurves:
    meta, body = {}, []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                k, _, v = line[1:].partition("=")
                meta[k.strip()] = v.strip()
            elif line.strip():
                body.append(line)
    reader = csv.reader(body)
    if tuple(next(reader)) != CURVES_HEADER:
        raise ConfigurationError(f"{path}: header must be {','.join(CURVES_HEADER)}")
    cols = {}
    n = B = seed = None
    for p, t, m, s, n, B, seed in reader:
        cols.setdefault(p, []).append((float(t), float(m), float(s)))
    t = np.array([r[0] for r in next(iter(cols.values()))])
    return ProcessCurves(
        t=t,
        mean={p: np.array([r[1] for r in v]) for p, v in cols.items()},
        sd={p: np.array([r[2] for r in v]) for p, v in cols.items()},
        n=int(n),
        B=int(B),
        family=meta.get("family", ""),
        seed=int(seed),
        failures=int(meta.get("failures", 0)),
    )
