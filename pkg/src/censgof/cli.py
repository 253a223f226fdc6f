"""Command line interface.

Exit status: 0 when the command ran (and, for ``gof``, no test rejected),
2 when some ``gof`` test rejected at the requested level, 1 on any error
including usage errors.
"""

from __future__ import annotations

import argparse
import csv
import sys
import warnings
from dataclasses import replace

import numpy as np

from . import __version__
from ._validation import as_censored_sample
from .critvals import CriticalValueTable, simulate_critical_values
from .distributions import parse_family
from .exceptions import CensGofError
from .harness import PowerTable, emit_report, load_config, packaged_config, parse_config_text, run_power_study
from .process_lab import MIN_B, MIN_N, ProcessGrid, emit_curves, simulate_decomposition
from .stats import (
    DEFAULT_CF_WEIGHT,
    DEFAULT_LEVELS,
    TRANSFORMED_STATISTICS,
    Statistic,
    as_statistic,
    direct_statistics,
    run_test,
)
from .transforms import TransformKind, as_transform_kind, transformation7

EXIT_OK, EXIT_ERROR, EXIT_REJECT = 0, 1, 2

EPILOG = "exit status: 0 = ran (no rejection), 2 = rejected at --alpha (gof), 1 = error"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _echo(items, out=None):
    out = out or sys.stdout
    for k, v in items:
        print(f"# {k} = {v}", file=out)


def _levels(text):
    try:
        levels = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid levels {text!r}") from None
    if not all(0 < lv < 1 for lv in levels):
        raise argparse.ArgumentTypeError("levels must lie in (0, 1)")
    return levels


def _transforms(text):
    if text.lower() == "all":
        return tuple(TransformKind)
    try:
        return tuple(as_transform_kind(t) for t in text.split(","))
    except ValueError as err:
        raise argparse.ArgumentTypeError(str(err)) from None


def _statistics(text):
    if text.lower() == "all":
        return TRANSFORMED_STATISTICS
    try:
        return tuple(as_statistic(s) for s in text.split(","))
    except ValueError as err:
        raise argparse.ArgumentTypeError(str(err)) from None


def build_parser():
    p = _Parser(prog="censgof", description="Goodness-of-fit tests for Type-II censored samples.", epilog=EPILOG)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gof", help="test one censored sample", epilog=EPILOG)
    g.add_argument("data", help="file with one observed value per line ('-' for stdin)")
    size = g.add_mutually_exclusive_group(required=True)
    size.add_argument("--n", type=int, help="full sample size; the file holds the r smallest values")
    size.add_argument("--r", type=int, help="the file holds a complete sample; keep its r smallest values")
    g.add_argument("--null", required=True, help="exponential, gamma or normal")
    g.add_argument("--transform", type=_transforms, default=(TransformKind.MS,), help="MS, OS, LHB, FK1, FK2 or all")
    g.add_argument("--statistic", type=_statistics, default=(Statistic.A2,),
                   help="W2 (cvm), A2 (ad), C2 (cf), DS_A2, DS_W2, comma-separated, or all")
    g.add_argument("--alpha", type=float, default=0.05)
    g.add_argument("--levels", type=_levels, default=DEFAULT_LEVELS)
    g.add_argument("--critval-reps", type=int, default=None,
                   help="null replications (default 100000; 1000000 for DS)")
    g.add_argument("--critvals", help="critical-value CSV to use instead of simulating")
    g.add_argument("--cf-weight", type=float, default=DEFAULT_CF_WEIGHT)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--csv", help="also write the results as CSV")

    c = sub.add_parser("critvals", help="simulate critical values", epilog=EPILOG)
    c.add_argument("--statistic", type=_statistics, required=True)
    c.add_argument("--r", type=int, required=True)
    c.add_argument("--n", type=int, help="full sample size (direct statistics)")
    c.add_argument("--null", help="null family (direct statistics)")
    c.add_argument("--reps", type=int, default=None)
    c.add_argument("--levels", type=_levels, default=DEFAULT_LEVELS)
    c.add_argument("--cf-weight", type=float, default=DEFAULT_CF_WEIGHT)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--exact", action="store_true", help="write full precision instead of six decimals")
    c.add_argument("--out", required=True)

    w = sub.add_parser("power", help="run a power study from a config file", epilog=EPILOG)
    src = w.add_mutually_exclusive_group(required=True)
    src.add_argument("--config-file", help="flat key = value study description")
    src.add_argument("--packaged", help="name of a config shipped with the package, e.g. table1_gamma41.cfg")
    w.add_argument("--fast", action="store_true", help="2000 replications")
    w.add_argument("--seed", type=int, help="override the config seed")
    w.add_argument("--workers", type=int, default=1)
    w.add_argument("--out", required=True)

    pr = sub.add_parser("process", help="simulate the process decomposition", epilog=EPILOG)
    pr.add_argument("--n", type=int, required=True)
    pr.add_argument("--B", type=int, default=10_000)
    pr.add_argument("--family", default="exponential(1)")
    pr.add_argument("--spacing", type=float, default=0.005)
    pr.add_argument("--independent-normals", action="store_true")
    pr.add_argument("--seed", type=int, default=0)
    pr.add_argument("--workers", type=int, default=1)
    pr.add_argument("--out", required=True)
    return p


# ---------------------------------------------------------------------------


def _read_values(path):
    fh = sys.stdin if path == "-" else open(path)
    try:
        vals = []
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                vals.append(float(line))
            except ValueError:
                raise UsageError(f"{path}:{lineno}: not a number: {line!r}") from None
    finally:
        if fh is not sys.stdin:
            fh.close()
    return np.array(vals)


def cmd_gof(args):
    if not 0 < args.alpha < 1:
        raise UsageError("--alpha must lie in (0, 1)")
    try:
        s, notices = as_censored_sample(_read_values(args.data), n=args.n, r=args.r)
    except CensGofError as err:
        raise UsageError(str(err)) from None
    for note in notices:
        print(f"notice: {note}", file=sys.stderr)
    levels = tuple(sorted(set(args.levels) | {args.alpha}, reverse=True))
    _echo([
        ("command", "gof"), ("data", args.data), ("n", s.n), ("r", s.r), ("null", args.null),
        ("transform", ",".join(t.value for t in args.transform)),
        ("statistic", ",".join(x.value for x in args.statistic)),
        ("alpha", args.alpha), ("levels", ",".join(map(str, levels))),
        ("critval_reps", args.critval_reps if args.critval_reps else "default"),
        ("critvals", args.critvals or "simulated"), ("cf_weight", args.cf_weight), ("seed", args.seed),
    ])
    given = CriticalValueTable.from_csv(args.critvals) if args.critvals else None
    trans = [x for x in args.statistic if not x.is_direct]
    direct = [x for x in args.statistic if x.is_direct]

    results = []
    if trans:
        table = given or simulate_critical_values(trans, s.r, levels, args.critval_reps, args.seed, a=args.cf_weight)
        for kind in args.transform:
            z = transformation7(s, args.null, kind)
            for stat in trans:
                results.append((kind.value, run_test(z, stat, table, levels=levels, a=args.cf_weight)))
    if direct:
        table = given or simulate_critical_values(
            direct, s.r, levels, args.critval_reps, args.seed, n=s.n, null_family=args.null
        )
        for res in direct_statistics(s, args.null, table, levels):
            if res.statistic_name in direct:
                results.append(("-", res))

    head = ["transform", "statistic", "value"] + [f"cv{lv:g}" for lv in levels] + ["p_value", f"reject@{args.alpha:g}"]
    rows = []
    for kind, res in results:
        p = "" if res.p_value is None else f"{res.p_value:.4f}"
        rows.append([kind, res.statistic_name.value, f"{res.value:.6f}"]
                    + [f"{res.critical_values[lv]:.6f}" for lv in levels]
                    + [p, "yes" if res.reject[args.alpha] else "no"])
    widths = [max(len(str(x)) for x in col) for col in zip(head, *rows)]
    for row in [head] + rows:
        print("  ".join(str(x).rjust(w) for x, w in zip(row, widths)))
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(head)
            wr.writerows(rows)
    return EXIT_REJECT if any(res.reject[args.alpha] for _, res in results) else EXIT_OK


def cmd_critvals(args):
    direct = {x.is_direct for x in args.statistic}
    if len(direct) > 1:
        raise UsageError("direct and transformed statistics need separate runs")
    if direct.pop() and (args.n is None or args.null is None):
        raise UsageError("--n and --null are required for DS_A2 and DS_W2")
    items = [("command", "critvals"), ("statistic", ",".join(x.value for x in args.statistic)), ("r", args.r),
             ("n", args.n), ("null", args.null), ("reps", args.reps or "default"),
             ("levels", ",".join(map(str, args.levels))), ("cf_weight", args.cf_weight), ("seed", args.seed)]
    _echo(items)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        table = simulate_critical_values(
            list(args.statistic), args.r, args.levels, args.reps, args.seed,
            n=args.n, null_family=args.null, a=args.cf_weight, keep_null_sample=False,
        )
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    comments = {k: v for k, v in items if k not in table.meta}
    if args.exact:
        table.to_csv(args.out, exact=True, comments=comments)
    else:
        emit_report(table, args.out, comments=comments)
    for (stat, r, lv), (cv, _, _) in sorted(table.entries.items(), key=lambda kv: (kv[0][0].value, -kv[0][2])):
        print(f"{stat.value} r={r} level={lv:g}: {cv:.6f}")
    return EXIT_OK


def cmd_power(args):
    try:
        if args.config_file:
            configs = load_config(args.config_file)
        else:
            configs = parse_config_text(packaged_config(args.packaged), args.packaged)
    except FileNotFoundError as err:
        raise UsageError(str(err)) from None
    if args.seed is not None:
        configs = [replace(c, seed=args.seed) for c in configs]
    if args.fast:
        configs = [c.fast() for c in configs]
    table = PowerTable()
    meta = []
    for i, cfg in enumerate(configs, 1):
        desc = ", ".join(f"{k}={v}" for k, v in cfg.as_items())
        print(f"# config {i} = {desc}")
        meta.append((f"config {i}", desc))
        table = table + run_power_study(cfg, workers=args.workers)
    table.meta = meta
    emit_report(table, args.out)
    for row in table.rows:
        print(f"{row.alternative}({row.alt_params}) n={row.n} r={row.r} {row.transform:>3} {row.statistic:>5} "
              f"level={row.level:g}: {row.reject_pct:.1f}%")
    return EXIT_OK


def cmd_process(args):
    if args.n < MIN_N:
        raise UsageError(f"--n must be at least {MIN_N}")
    if args.B < MIN_B:
        raise UsageError(f"--B must be at least {MIN_B}")
    try:
        family = parse_family(args.family)
        grid = ProcessGrid(args.spacing)
    except (CensGofError, ValueError) as err:
        raise UsageError(str(err)) from None
    _echo([("command", "process"), ("family", family.label), ("n", args.n), ("B", args.B),
           ("spacing", args.spacing), ("independent_normals", args.independent_normals), ("seed", args.seed)])
    curves = simulate_decomposition(family, args.n, args.B, grid, args.seed, args.independent_normals, args.workers)
    emit_curves(curves, args.out, comments={"spacing": args.spacing, "independent_normals": args.independent_normals})
    print(f"decomposition identity: max error {curves.identity_error:.3g}")
    for p in curves.mean:
        print(f"{p:>14}: max |mean| {np.max(np.abs(curves.mean[p])):.4f}, max sd {np.max(curves.sd[p]):.4f}")
    return EXIT_OK


COMMANDS = {"gof": cmd_gof, "critvals": cmd_critvals, "power": cmd_power, "process": cmd_process}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return EXIT_ERROR
    except (CensGofError, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
