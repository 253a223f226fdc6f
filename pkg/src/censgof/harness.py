"""Monte Carlo power and level studies.

Each replication draws its censored sample from a private random stream
``stream(seed, tag, replication_index)``; replications are processed in
fixed index chunks and reduced by summing integer rejection counts, so a
study gives identical output for any number of worker processes.
"""

from __future__ import annotations

import csv
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np
from scipy import stats as sps

from ._rng import stream
from .critvals import (
    CRITVAL_HEADER,
    DEFAULT_DS_REPLICATIONS,
    DEFAULT_REPLICATIONS,
    CriticalValueTable,
    ensure_critical_values,
    simulate_critical_values,
)
from .distributions import Family, FamilySpec, as_family, parse_family, sample
from .estimators import NULL_FAMILIES
from .exceptions import CensGofError, ConfigurationError, CoverageError, StudyAbortedError
from .stats import (
    DEFAULT_CF_WEIGHT,
    DIRECT_NULLS,
    TRANSFORMED_STATISTICS,
    Statistic,
    as_statistic,
    censored_ad,
    censored_cvm,
    normality_statistic,
)
from .transforms import (
    TransformKind,
    as_transform_kind,
    clamp,
    fitted_uniforms_batch,
    normal_scores_batch,
)

POWER_HEADER = (
    "null", "alternative", "alt_params", "n", "r", "transform", "statistic",
    "level", "reject_pct", "replications", "failures", "seed",
)
DEFAULT_POWER_REPLICATIONS = 10_000
FAST_REPLICATIONS = 2_000
MAX_FAILURE_RATE = 0.01
CHUNK = 500
NO_TRANSFORM = "-"

DEFAULT_NULL_PARAMS = {
    Family.EXPONENTIAL: (1.0,),
    Family.GAMMA: (2.0, 1.0),
    Family.NORMAL: (0.0, 1.0),
}


def censored_count(n, censor_fraction) -> int:
    """``r = round(censor_fraction * n)``, rounding halves up."""
    return int(math.floor(censor_fraction * n + 0.5))


@dataclass(frozen=True)
class StudyConfig:
    """One cell block of a simulation study: fixed null, ``n`` and ``r``.

    ``censor_fraction`` is the observed proportion ``r / n``.
    """

    null_family: Family
    alternatives: tuple
    n: int
    censor_fraction: float
    transforms: tuple = tuple(TransformKind)
    statistics: tuple = TRANSFORMED_STATISTICS
    levels: tuple = (0.05,)
    replications: int = DEFAULT_POWER_REPLICATIONS
    seed: int = 0
    cf_weight: float = DEFAULT_CF_WEIGHT
    critval_replications: int = DEFAULT_REPLICATIONS
    ds_replications: int = DEFAULT_DS_REPLICATIONS

    def __post_init__(self):
        def set_(k, v):
            object.__setattr__(self, k, v)

        set_("null_family", as_family(self.null_family))
        if self.null_family not in NULL_FAMILIES:
            raise ConfigurationError(f"null family {self.null_family} has no censored-sample estimator")
        set_("alternatives", tuple(a if isinstance(a, FamilySpec) else parse_family(a) for a in self.alternatives))
        set_("transforms", tuple(as_transform_kind(t) for t in self.transforms))
        set_("statistics", tuple(as_statistic(s) for s in self.statistics))
        set_("levels", tuple(float(lv) for lv in self.levels))
        set_("n", int(self.n))
        set_("censor_fraction", float(self.censor_fraction))
        for k in ("replications", "seed", "critval_replications", "ds_replications"):
            set_(k, int(getattr(self, k)))
        if not self.alternatives:
            raise ConfigurationError("at least one alternative is required")
        if not 0 < self.censor_fraction <= 1:
            raise ConfigurationError("censor_fraction must lie in (0, 1]")
        if not 3 <= self.r <= self.n:
            raise ConfigurationError(f"need 3 <= r <= n, got r={self.r} for n={self.n}")
        if self.replications < 100:
            raise ConfigurationError("replications must be at least 100")
        if not all(0 < lv < 1 for lv in self.levels):
            raise ConfigurationError("levels must lie in (0, 1)")
        if not self.cf_weight > 0:
            raise ConfigurationError("cf_weight must be positive")
        if any(s.is_direct for s in self.statistics) and self.null_family not in DIRECT_NULLS:
            raise ConfigurationError(f"direct statistics are not available for the {self.null_family} null")

    @property
    def r(self) -> int:
        return censored_count(self.n, self.censor_fraction)

    @property
    def null_spec(self) -> FamilySpec:
        return FamilySpec(self.null_family, DEFAULT_NULL_PARAMS[self.null_family])

    def fast(self) -> "StudyConfig":
        return replace(self, replications=FAST_REPLICATIONS)

    def as_items(self):
        """Resolved ``(key, text)`` pairs in config-file syntax."""
        return [
            ("null", self.null_family.value),
            ("alternatives", "; ".join(a.label for a in self.alternatives)),
            ("n", str(self.n)),
            ("censor_fraction", repr(self.censor_fraction)),
            ("r", str(self.r)),
            ("transforms", ",".join(t.value for t in self.transforms)),
            ("statistics", ",".join(s.value for s in self.statistics)),
            ("levels", ",".join(repr(lv) for lv in self.levels)),
            ("replications", str(self.replications)),
            ("seed", str(self.seed)),
            ("cf_weight", repr(self.cf_weight)),
            ("critval_replications", str(self.critval_replications)),
            ("ds_replications", str(self.ds_replications)),
        ]


# ---------------------------------------------------------------------------
# config files

_LIST_KEYS = {"n", "censor_fraction"}
_CONFIG_KEYS = {f.name for f in fields(StudyConfig)} | {"null", "r"}


def _split_specs(text):
    # commas inside parentheses belong to parameter lists
    return [p.strip() for p in re.split(r"[;,](?![^(]*\))", text) if p.strip()]


def parse_config_text(text, source="<config>"):
    """Parse flat ``key = value`` text into one config per ``(n, censor_fraction)``.

    ``n`` and ``censor_fraction`` may be comma-separated lists; the grid is
    expanded.  Lines starting with ``#`` are comments.
    """
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().lower()
        if not sep:
            raise ConfigurationError(f"{source}:{lineno}: expected key = value")
        if key not in _CONFIG_KEYS:
            raise ConfigurationError(f"{source}:{lineno}: unknown config key {key!r}")
        raw[key] = value.strip()
    if "null_family" in raw:
        raw.setdefault("null", raw.pop("null_family"))
    raw.pop("r", None)
    for req in ("null", "alternatives", "n", "censor_fraction"):
        if req not in raw:
            raise ConfigurationError(f"{source}: missing config key {req!r}")
    kw = {}
    try:
        for key, value in raw.items():
            if key in _LIST_KEYS:
                continue
            if key == "null":
                kw["null_family"] = value
            elif key == "alternatives":
                kw[key] = tuple(_split_specs(value))
            elif key == "transforms":
                kw[key] = tuple(TransformKind) if value.lower() == "all" else tuple(_split_specs(value))
            elif key == "statistics":
                kw[key] = tuple(_split_specs(value))
            elif key == "levels":
                kw[key] = tuple(float(v) for v in _split_specs(value))
            elif key == "cf_weight":
                kw[key] = float(value)
            else:
                kw[key] = int(value)
        ns = [int(v) for v in _split_specs(raw["n"])]
        fracs = [float(v) for v in _split_specs(raw["censor_fraction"])]
    except ValueError as err:
        raise ConfigurationError(f"{source}: {err}") from None
    return [StudyConfig(n=n, censor_fraction=f, **kw) for n in ns for f in fracs]


def load_config(path):
    with open(path) as fh:
        return parse_config_text(fh.read(), str(path))


def packaged_config(name):
    """Text of a config file shipped with the package."""
    from importlib.resources import files

    return (files("censgof") / "configs" / name).read_text()


# ---------------------------------------------------------------------------
# power tables


@dataclass(frozen=True)
class PowerRow:
    null: str
    alternative: str
    alt_params: str
    n: int
    r: int
    transform: str
    statistic: str
    level: float
    reject_pct: float
    replications: int
    failures: int
    seed: int

    def cells(self):
        return [
            self.null, self.alternative, self.alt_params, self.n, self.r, self.transform,
            self.statistic, repr(self.level), f"{self.reject_pct:.1f}", self.replications,
            self.failures, self.seed,
        ]


@dataclass
class PowerTable:
    """Rejection percentages, one row per (alternative, n, r, transform, statistic, level).

    Percentages are rounded to one decimal.
    """

    rows: list = field(default_factory=list)
    meta: list = field(default_factory=list)

    def __eq__(self, other):
        if not isinstance(other, PowerTable):
            return NotImplemented
        return self.rows == other.rows

    def __add__(self, other):
        return PowerTable(self.rows + other.rows, self.meta + other.meta)

    def lookup(self, alternative=None, n=None, r=None, transform=None, statistic=None, level=None):
        out = []
        for row in self.rows:
            if alternative is not None and not _alt_matches(row, alternative):
                continue
            if n is not None and row.n != n:
                continue
            if r is not None and row.r != r:
                continue
            if transform is not None and row.transform != str(transform):
                continue
            if statistic is not None and row.statistic != str(as_statistic(statistic)):
                continue
            if level is not None and not math.isclose(row.level, level):
                continue
            out.append(row)
        return out

    def value(self, **keys) -> float:
        rows = self.lookup(**keys)
        if len(rows) != 1:
            raise KeyError(f"{len(rows)} rows match {keys}")
        return rows[0].reject_pct


def _alt_matches(row, alternative):
    spec = alternative if isinstance(alternative, FamilySpec) else parse_family(alternative)
    return row.alternative == spec.family.value and row.alt_params == _params_text(spec)


def _params_text(spec):
    return ";".join(repr(float(p)) for p in spec.params)


# ---------------------------------------------------------------------------
# simulation


def _stream_tag(null, alt, n, r):
    return f"power:{null.value}:{alt.label}:n={n}:r={r}"


def _draw(alt, n, r, rng):
    return np.sort(sample(alt, n, rng))[:r]


def _score_rows(X, n, null, transforms, direct, a):
    """Statistic values per replication: ``{(transform, statistic): values}`` and ok mask."""
    U, ok = fitted_uniforms_batch(X, n, null)
    values = {}
    if transforms:
        try:
            z, good, _ = normal_scores_batch(U, n, [t for t, _ in transforms])
        except CensGofError:
            z, good = _score_rows_slow(U, n, [t for t, _ in transforms])
        ok &= good
        for t, stats in transforms:
            zt = np.where(ok[:, None], z[t], 0.0)
            zt[~ok] = np.linspace(-1, 1, zt.shape[1])
            for s in stats:
                values[(t.value, s.value)] = normality_statistic(s, zt, a)
    if direct:
        Z, _ = clamp(U)
        for s in direct:
            fn = censored_ad if s is Statistic.DS_A2 else censored_cvm
            values[(NO_TRANSFORM, s.value)] = fn(Z, n)
    for v in values.values():
        ok &= np.isfinite(v)
    return values, ok


def _score_rows_slow(U, n, kinds):
    z = {k: np.zeros_like(U) for k in kinds}
    ok = np.ones(U.shape[0], dtype=bool)
    for i in range(U.shape[0]):
        try:
            zi, gi, _ = normal_scores_batch(U[i : i + 1], n, kinds)
        except CensGofError:
            ok[i] = False
            continue
        ok[i] = gi[0]
        for k in kinds:
            z[k][i] = zi[k][0]
    return z, ok


def _run_chunk(job):
    """Rejection counts and failures for replications ``start <= i < stop``."""
    null, alt, n, r, seed, start, stop, transforms, direct, a, cvs = job
    tag = _stream_tag(null, alt, n, r)
    idx = range(start, stop)
    X = np.stack([_draw(alt, n, r, stream(seed, tag, i)) for i in idx])
    values, ok = _score_rows(X, n, null, transforms, direct, a)
    if not ok.all():
        # one redraw per failed replication, from a dedicated stream
        bad = np.flatnonzero(~ok)
        X2 = np.stack([_draw(alt, n, r, stream(seed, tag + ":redraw", start + i)) for i in bad])
        v2, ok2 = _score_rows(X2, n, null, transforms, direct, a)
        for key in values:
            values[key][bad] = v2[key]
        ok[bad] = ok2
    counts = {}
    for key, v in values.items():
        for level, cv in cvs[key[1]].items():
            counts[(key, level)] = int(np.count_nonzero(ok & (v > cv)))
    return counts, int(np.count_nonzero(~ok))


def _critical_values(config, critvals):
    r = config.r
    trans = [s for s in config.statistics if not s.is_direct]
    direct = [s for s in config.statistics if s.is_direct]
    table = critvals
    if trans:
        table = ensure_critical_values(
            table, trans, r, config.levels, config.critval_replications, config.seed, config.cf_weight
        )
    if direct:
        have = table is not None and all(
            (s, r, lv) in table.entries for s in direct for lv in config.levels
        ) and table.meta.get("n") == config.n and table.meta.get("null") == config.null_family.value
        if not have:
            ds = simulate_critical_values(
                direct, r, config.levels, config.ds_replications, config.seed,
                n=config.n, null_family=config.null_family, keep_null_sample=False,
            )
            table = ds if table is None else CriticalValueTable(
                {**table.entries, **ds.entries}, {}, {**table.meta, **ds.meta}
            )
    return {s.value: {lv: table.critical_value(s, r, lv) for lv in config.levels} for s in config.statistics}


def run_power_study(config: StudyConfig, critvals: CriticalValueTable | None = None, workers=None) -> PowerTable:
    """Simulate rejection percentages for every alternative in ``config``.

    Critical values missing from ``critvals`` are simulated with
    ``config.critval_replications`` (and ``config.ds_replications`` for the
    direct statistics).  A replication whose pipeline fails is redrawn once;
    if it fails again it is counted in ``failures`` and excluded from the
    denominator.

    Raises
    ------
    StudyAbortedError
        If failures exceed 1% of the replications for some alternative.
    """
    cvs = _critical_values(config, critvals)
    trans_stats = tuple(s for s in config.statistics if not s.is_direct)
    transforms = tuple((t, trans_stats) for t in config.transforms) if trans_stats else ()
    direct = tuple(s for s in config.statistics if s.is_direct)
    n, r, null = config.n, config.r, config.null_family

    jobs = []
    for alt in config.alternatives:
        for start in range(0, config.replications, CHUNK):
            stop = min(start + CHUNK, config.replications)
            jobs.append((null, alt, n, r, config.seed, start, stop, transforms, direct, config.cf_weight, cvs))
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_chunk, jobs))
    else:
        results = [_run_chunk(j) for j in jobs]

    rows = []
    per_alt = len(jobs) // len(config.alternatives)
    for k, alt in enumerate(config.alternatives):
        chunk_results = results[k * per_alt : (k + 1) * per_alt]
        failures = sum(f for _, f in chunk_results)
        if failures > MAX_FAILURE_RATE * config.replications:
            raise StudyAbortedError(
                f"{failures} of {config.replications} replications failed for {alt.label} "
                f"(n={n}, r={r}); limit is {MAX_FAILURE_RATE:.0%}"
            )
        totals = {}
        for counts, _ in chunk_results:
            for key, c in counts.items():
                totals[key] = totals.get(key, 0) + c
        used = config.replications - failures
        cells = [(t.value, s.value) for t, stats in transforms for s in stats]
        cells += [(NO_TRANSFORM, s.value) for s in direct]
        for cell in cells:
            for level in config.levels:
                rows.append(PowerRow(
                    null.value, alt.family.value, _params_text(alt), n, r, cell[0], cell[1], level,
                    round(100.0 * totals[(cell, level)] / used, 1), config.replications, failures, config.seed,
                ))
    return PowerTable(rows, config.as_items())


def run_level_study(config: StudyConfig, critvals=None, workers=None, levels=(0.10, 0.05, 0.01)) -> PowerTable:
    """Power study with the null distribution itself as the only alternative."""
    cfg = replace(config, alternatives=(config.null_spec,), levels=tuple(levels))
    return run_power_study(cfg, critvals, workers)


def null_statistic_sample(null_spec, n, r, transform, statistic, replications, seed, a=DEFAULT_CF_WEIGHT):
    """Statistic values after the normal-scores pipeline with data drawn from ``null_spec``."""
    spec = null_spec if isinstance(null_spec, FamilySpec) else parse_family(null_spec)
    kind = as_transform_kind(transform)
    stat = as_statistic(statistic)
    tag = f"nullsample:{spec.label}:n={n}:r={r}"
    X = np.stack([_draw(spec, n, r, stream(seed, tag, i)) for i in range(replications)])
    values, ok = _score_rows(X, n, spec.family, ((kind, (stat,)),), (), a)
    return values[(kind.value, stat.value)][ok]


# ---------------------------------------------------------------------------
# ranking


@dataclass
class RankSummary:
    """Ranks of tests within each transform and of transforms within each test.

    ``test_rank[(statistic, transform)]`` orders the statistics for a fixed
    transform; ``transform_rank[(statistic, transform)]`` orders the
    transforms for a fixed statistic.  Rank 1 is the best (lowest summed
    rank, where within each scenario the highest rejection rate gets rank 1).
    """

    statistics: tuple
    transforms: tuple
    test_rank: dict
    transform_rank: dict
    test_score: dict
    transform_score: dict
    scenarios: int

    def cell(self, statistic, transform):
        key = (str(as_statistic(statistic)), str(as_transform_kind(transform)))
        return self.test_rank[key], self.transform_rank[key]


def rank_summary(tables, include_null_rows=False, level=0.05) -> RankSummary:
    """Summed-rank comparison of statistics and transforms over all scenarios.

    A scenario is one (null, alternative, n, r) block.  Rows where the
    alternative equals the null family are level checks and are skipped
    unless ``include_null_rows`` is true.
    """
    rows = [row for t in tables for row in t.rows if row.transform != NO_TRANSFORM]
    rows = [row for row in rows if math.isclose(row.level, level)]
    if not include_null_rows:
        rows = [row for row in rows if row.alternative != row.null]
    if not rows:
        raise CoverageError(["<all>"])
    stats_ = tuple(dict.fromkeys(row.statistic for row in rows))
    trans_ = tuple(dict.fromkeys(row.transform for row in rows))
    grid = {}
    for row in rows:
        grid.setdefault((row.null, row.alternative, row.alt_params, row.n, row.r), {})[
            (row.statistic, row.transform)
        ] = row.reject_pct
    missing = [
        (scen, cell)
        for scen, cells in grid.items()
        for cell in ((s, t) for s in stats_ for t in trans_)
        if cell not in cells
    ]
    if missing:
        raise CoverageError(missing)
    test_score = {(s, t): 0.0 for s in stats_ for t in trans_}
    trans_score = dict(test_score)
    for cells in grid.values():
        for t in trans_:
            ranks = sps.rankdata([-cells[(s, t)] for s in stats_])
            for s, rk in zip(stats_, ranks):
                test_score[(s, t)] += rk
        for s in stats_:
            ranks = sps.rankdata([-cells[(s, t)] for t in trans_])
            for t, rk in zip(trans_, ranks):
                trans_score[(s, t)] += rk
    test_rank, trans_rank = {}, {}
    for t in trans_:
        ranks = sps.rankdata([test_score[(s, t)] for s in stats_], method="min")
        test_rank.update({(s, t): int(rk) for s, rk in zip(stats_, ranks)})
    for s in stats_:
        ranks = sps.rankdata([trans_score[(s, t)] for t in trans_], method="min")
        trans_rank.update({(s, t): int(rk) for t, rk in zip(trans_, ranks)})
    return RankSummary(stats_, trans_, test_rank, trans_rank, test_score, trans_score, len(grid))


# ---------------------------------------------------------------------------
# reports


def emit_report(table, path, comments=None):
    """Write a PowerTable or CriticalValueTable as CSV with ``#`` config lines.

    Power percentages are written with one decimal, critical values with
    six decimals.
    """
    if isinstance(table, CriticalValueTable):
        table.to_csv(path, exact=False, comments=comments)
        return
    with open(path, "w", newline="") as fh:
        for k, v in list(table.meta) + list((comments or {}).items()):
            fh.write(f"# {k} = {v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(POWER_HEADER)
        for row in table.rows:
            w.writerow(row.cells())


def read_report(path):
    """Parse a file written by :func:`emit_report`."""
    meta, body = [], []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                k, _, v = line[1:].partition("=")
                meta.append((k.strip(), v.strip()))
            elif line.strip():
                body.append(line)
    header = tuple(next(csv.reader(body[:1]), ()))
    if header == CRITVAL_HEADER:
        return CriticalValueTable.from_csv(path)
    if header != POWER_HEADER:
        raise ConfigurationError(f"{path}: unrecognized report header {','.join(header)}")
    rows = []
    for cells in csv.reader(body[1:]):
        null, alt, params, n, r, t, s, level, pct, reps, fails, seed = cells
        rows.append(PowerRow(null, alt, params, int(n), int(r), t, s, float(level), float(pct),
                             int(reps), int(fails), int(seed)))
    return PowerTable(rows, meta)
