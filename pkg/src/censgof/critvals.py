"""Simulated critical values.

Under the null hypothesis the normal scores behave like ``r`` standard
normal variates standardized by their sample mean and standard deviation,
so the null laws of W^2, A^2 and C^2 depend on ``r`` only.  The direct
statistics additionally depend on ``n`` and on the null family.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._rng import stream
from .distributions import Family, FamilySpec, as_family, sample_censored_batch
from .exceptions import ConfigurationError, PrecisionWarning
from .stats import (
    DEFAULT_CF_WEIGHT,
    DEFAULT_LEVELS,
    DIRECT_NULLS,
    Statistic,
    as_statistic,
    direct_values_batch,
    normality_statistic,
)

CRITVAL_HEADER = ("statistic", "r", "level", "critical_value", "replications", "seed")
DEFAULT_REPLICATIONS = 100_000
DEFAULT_DS_REPLICATIONS = 1_000_000
CHUNK = 10_000


@dataclass
class CriticalValueTable:
    """Upper-tail critical values keyed by ``(statistic, r, level)``.

    Attributes
    ----------
    entries : dict
        ``(Statistic, r, level) -> (critical_value, replications, seed)``.
    null_samples : dict
        Optional sorted simulated null statistics keyed by ``(Statistic, r)``,
        used for empirical p-values.
    meta : dict
        Context of the simulation, e.g. ``n`` and ``null`` for the direct
        statistics and ``cf_weight`` for C^2.
    """

    entries: dict = field(default_factory=dict)
    null_samples: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def replications(self):
        reps = {e[1] for e in self.entries.values()}
        return reps.pop() if len(reps) == 1 else None

    @property
    def seed(self):
        seeds = {e[2] for e in self.entries.values()}
        return seeds.pop() if len(seeds) == 1 else None

    def critical_value(self, statistic, r, level) -> float:
        key = (as_statistic(statistic), int(r), float(level))
        try:
            return self.entries[key][0]
        except KeyError:
            raise ConfigurationError(
                f"no critical value for {key[0]} at r={key[1]}, level={key[2]:g}"
            ) from None

    def levels_for(self, statistic, r):
        stat = as_statistic(statistic)
        return sorted((k[2] for k in self.entries if k[0] is stat and k[1] == int(r)), reverse=True)

    def p_value(self, statistic, r, value):
        """Fraction of simulated null statistics at or above ``value``."""
        sample = self.null_samples.get((as_statistic(statistic), int(r)))
        if sample is None:
            return None
        return float(sample.size - np.searchsorted(sample, value, side="left")) / sample.size

    def merge(self, other: "CriticalValueTable") -> "CriticalValueTable":
        for k, v in other.meta.items():
            if k in self.meta and self.meta[k] != v:
                raise ConfigurationError(f"cannot merge tables with different {k}: {self.meta[k]} vs {v}")
        return CriticalValueTable(
            {**self.entries, **other.entries},
            {**self.null_samples, **other.null_samples},
            {**self.meta, **other.meta},
        )

    def __eq__(self, other):
        if not isinstance(other, CriticalValueTable):
            return NotImplemented
        return self.entries == other.entries and self.meta == other.meta

    # -- I/O ---------------------------------------------------------------

    def to_csv(self, path, exact=True, comments=None):
        """Write the table.

        With ``exact=True`` values are written with ``repr`` precision and
        re-read bit-for-bit; otherwise they are rounded to six decimals.
        """
        fmt = repr if exact else (lambda v: f"{v:.6f}")
        with open(path, "w", newline="") as fh:
            for k, v in {**self.meta, **(comments or {})}.items():
                fh.write(f"# {k} = {v}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CRITVAL_HEADER)
            for (stat, r, level), (cv, reps, seed) in sorted(
                self.entries.items(), key=lambda kv: (kv[0][0].value, kv[0][1], -kv[0][2])
            ):
                w.writerow([stat.value, r, repr(level), fmt(float(cv)), reps, seed])

    @classmethod
    def from_csv(cls, path) -> "CriticalValueTable":
        meta, entries = {}, {}
        with open(path, newline="") as fh:
            lines = []
            for line in fh:
                if line.startswith("#"):
                    key, _, val = line[1:].partition("=")
                    meta[key.strip()] = _parse_meta(val.strip())
                elif line.strip():
                    lines.append(line)
        rows = list(csv.reader(lines))
        if not rows or tuple(rows[0]) != CRITVAL_HEADER:
            raise ConfigurationError(f"{path}: header must be {','.join(CRITVAL_HEADER)}")
        for row in rows[1:]:
            stat, r, level, cv, reps, seed = row
            entries[(as_statistic(stat), int(r), float(level))] = (float(cv), int(reps), int(seed))
        known = {k: meta[k] for k in ("n", "null", "cf_weight") if k in meta}
        return cls(entries, {}, known)


def _parse_meta(text):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def _check_precision(replications, levels):
    for lv in levels:
        if replications * lv < 10:
            warnings.warn(
                f"{replications} replications give fewer than 10 exceedances at level {lv:g}; "
                "the critical value is unreliable",
                PrecisionWarning,
                stacklevel=3,
            )


def _null_spec(null):
    return FamilySpec(null, (1.0,)) if null is Family.EXPONENTIAL else FamilySpec(null, (0.0, 1.0))


def simulate_critical_values(
    statistic,
    r,
    levels=DEFAULT_LEVELS,
    replications=None,
    seed=0,
    *,
    n=None,
    null_family=None,
    a=DEFAULT_CF_WEIGHT,
    keep_null_sample=True,
) -> CriticalValueTable:
    """Simulate upper-tail critical values.

    Parameters
    ----------
    statistic : Statistic, str or sequence of them
        All statistics requested in one call are computed from the same
        simulated samples.  W2, A2 and C2 cannot be mixed with DS_W2 and
        DS_A2.
    r : int
    levels : sequence of float
    replications : int, optional
        Defaults to 10^5, or 10^6 for the direct statistics.
    seed : int
    n, null_family :
        Required for the direct statistics only.
    a : float
        Weight of C^2.

    Returns
    -------
    CriticalValueTable
        The critical value at level ``alpha`` is the empirical
        ``1 - alpha`` quantile of the simulated statistics.
    """
    stats = [as_statistic(s) for s in (statistic if isinstance(statistic, (list, tuple)) else [statistic])]
    direct = {s.is_direct for s in stats}
    if len(direct) != 1:
        raise ConfigurationError("direct and transformed statistics must be simulated separately")
    direct = direct.pop()
    r = int(r)
    levels = tuple(float(lv) for lv in levels)
    if not all(0 < lv < 1 for lv in levels):
        raise ConfigurationError("levels must lie in (0, 1)")
    if replications is None:
        replications = DEFAULT_DS_REPLICATIONS if direct else DEFAULT_REPLICATIONS
    replications = int(replications)
    if replications < 1:
        raise ConfigurationError("replications must be positive")
    _check_precision(replications, levels)

    meta = {}
    if direct:
        if n is None or null_family is None:
            raise ConfigurationError("direct statistics need n and null_family")
        null = as_family(null_family)
        if null not in DIRECT_NULLS:
            raise ConfigurationError(f"direct statistics are not available for the {null} null")
        n = int(n)
        if not 2 <= r <= n:
            raise ConfigurationError(f"need 2 <= r <= n, got r={r}, n={n}")
        meta = {"n": n, "null": null.value}
        tag = f"critvals:DS:{null.value}:n={n}:r={r}"
    else:
        if r < 2:
            raise ConfigurationError("need r >= 2")
        if Statistic.C2 in stats:
            meta = {"cf_weight": float(a)}
        tag = f"critvals:r={r}"

    values = {s: [] for s in stats}
    for c, start in enumerate(range(0, replications, CHUNK)):
        m = min(CHUNK, replications - start)
        rng = stream(seed, tag, c)
        if direct:
            X = sample_censored_batch(_null_spec(null), n, r, m, rng)
            a2, w2, _ = direct_values_batch(X, n, null)
            values.get(Statistic.DS_A2, []).append(a2)
            values.get(Statistic.DS_W2, []).append(w2)
        else:
            y = rng.standard_normal((m, r))
            z = (y - y.mean(axis=1, keepdims=True)) / y.std(axis=1, ddof=1, keepdims=True)
            for s in stats:
                values[s].append(normality_statistic(s, z, a))

    table = CriticalValueTable(meta=meta)
    for s in stats:
        sample = np.sort(np.concatenate(values[s]))
        for lv in levels:
            cv = float(np.quantile(sample, 1.0 - lv))
            table.entries[(s, r, lv)] = (cv, replications, int(seed))
        if keep_null_sample:
            sample.setflags(write=False)
            table.null_samples[(s, r)] = sample
    return table


def ensure_critical_values(table, statistics, r, levels, replications, seed, a=DEFAULT_CF_WEIGHT):
    """Return ``table`` extended with any missing transformed-statistic entries."""
    table = table or CriticalValueTable()
    missing = [
        s for s in statistics
        if any((as_statistic(s), int(r), float(lv)) not in table.entries for lv in levels)
    ]
    if missing:
        table = table.merge(
            simulate_critical_values(missing, r, levels, replications, seed, a=a, keep_null_sample=False)
        )
    return table


def monte_carlo_error(level, replications) -> float:
    """Standard error of a simulated rejection rate at ``level``."""
    return math.sqrt(level * (1 - level) / replications)
