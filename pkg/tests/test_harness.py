import numpy as np
import pytest

from censgof.critvals import simulate_critical_values
from censgof.distributions import parse_family
from censgof.exceptions import ConfigurationError, CoverageError, StudyAbortedError
from censgof.harness import (
    FAST_REPLICATIONS,
    POWER_HEADER,
    PowerRow,
    PowerTable,
    StudyConfig,
    censored_count,
    emit_report,
    load_config,
    null_statistic_sample,
    packaged_config,
    parse_config_text,
    rank_summary,
    read_report,
    run_level_study,
    run_power_study,
)

SMALL = """
# small study
null = exponential
alternatives = gamma(4,1), weibull(2,1)
transforms = MS, LHB
statistics = A2, W2, C2
n = 20
censor_fraction = 0.5, 0.75
levels = 0.10, 0.05, 0.01
replications = 300
seed = 11
critval_replications = 5000
"""


def test_censored_count():
    assert censored_count(40, 0.5) == 20 and censored_count(100, 0.75) == 75
    assert censored_count(10, 0.25) == 3 and censored_count(10, 0.35) == 4


def test_parse_config_grid():
    cfgs = parse_config_text(SMALL)
    assert [(c.n, c.r) for c in cfgs] == [(20, 10), (20, 15)]
    c = cfgs[0]
    assert [a.label for a in c.alternatives] == ["gamma(4,1)", "wei(2,1)"]
    assert [t.value for t in c.transforms] == ["MS", "LHB"]
    assert c.levels == (0.10, 0.05, 0.01) and c.replications == 300 and c.seed == 11
    assert c.fast().replications == FAST_REPLICATIONS


def test_parse_config_errors():
    with pytest.raises(ConfigurationError, match="colour"):
        parse_config_text(SMALL + "colour = red\n")
    with pytest.raises(ConfigurationError, match="alternatives"):
        parse_config_text("null = exp\nn = 20\ncensor_fraction = 0.5\n")
    with pytest.raises(ConfigurationError):
        parse_config_text(SMALL.replace("replications = 300", "replications = lots"))
    with pytest.raises(ConfigurationError):
        parse_config_text("just words\n")


def test_config_validation():
    with pytest.raises(ConfigurationError):
        StudyConfig("exp", ("gamma(2,1)",), n=4, censor_fraction=0.5)
    with pytest.raises(ConfigurationError):
        StudyConfig("exp", ("gamma(2,1)",), n=40, censor_fraction=0.5, replications=50)
    with pytest.raises(ConfigurationError):
        StudyConfig("weibull", ("gamma(2,1)",), n=40, censor_fraction=0.5)
    with pytest.raises(ConfigurationError):
        StudyConfig("gamma", ("exp(1)",), n=40, censor_fraction=0.5, statistics=("DS_A2",))


def test_packaged_config_parses(tmp_path):
    text = packaged_config("table1_gamma41.cfg")
    cfgs = parse_config_text(text)
    assert {(c.n, c.r) for c in cfgs} == {(40, 20), (40, 30), (100, 50), (100, 75)}
    assert all(c.replications == 10_000 for c in cfgs)
    path = tmp_path / "c.cfg"
    path.write_text(text)
    assert load_config(path) == cfgs


@pytest.fixture(scope="module")
def study():
    cfg = parse_config_text(SMALL)[0]
    return cfg, run_power_study(cfg)


def test_power_table_shape_and_nesting(study):
    cfg, table = study
    assert len(table.rows) == 2 * 2 * 3 * 3
    for row in table.rows:
        assert 0 <= row.reject_pct <= 100 and row.replications == 300 and row.seed == 11
    for alt in cfg.alternatives:
        for t in ("MS", "LHB"):
            for s in ("A2", "W2", "C2"):
                v = [table.value(alternative=alt, transform=t, statistic=s, level=lv) for lv in (0.10, 0.05, 0.01)]
                assert v[0] >= v[1] >= v[2]


def test_power_is_deterministic_across_workers(study):
    cfg, table = study
    assert run_power_study(cfg, workers=2) == table


def test_supplied_critical_values_are_used(study):
    cfg, table = study
    cv = simulate_critical_values(["A2", "W2", "C2"], cfg.r, cfg.levels, cfg.critval_replications, cfg.seed)
    assert run_power_study(cfg, critvals=cv) == table


def test_report_round_trip(tmp_path, study):
    _, table = study
    path = tmp_path / "power.csv"
    emit_report(table, path, comments={"command": "test"})
    text = path.read_text()
    body = [ln for ln in text.splitlines() if not ln.startswith("#")]
    assert body[0] == ",".join(POWER_HEADER)
    assert "# seed = 11" in text and "# command = test" in text
    pct = [ln.split(",")[POWER_HEADER.index("reject_pct")] for ln in body[1:]]
    assert all(len(p.split(".")[1]) == 1 for p in pct)
    back = read_report(path)
    assert back == table
    path2 = tmp_path / "power2.csv"
    emit_report(back, path2)
    assert [ln for ln in path2.read_text().splitlines() if not ln.startswith("#")] == body


def test_report_with_critical_values(tmp_path):
    t = simulate_critical_values("W2", 10, replications=2000, seed=1)
    path = tmp_path / "cv.csv"
    emit_report(t, path)
    back = read_report(path)
    assert back.entries.keys() == t.entries.keys()
    assert all(f"{t.entries[k][0]:.6f}" == f"{back.entries[k][0]:.6f}" for k in t.entries)
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n")
    with pytest.raises(ConfigurationError):
        read_report(bad)


def test_level_study_calibration():
    cfg = StudyConfig("normal", ("normal(0,1)",), n=30, censor_fraction=0.5,
                      transforms=("OS",), statistics=("W2", "A2", "C2", "DS_A2", "DS_W2"),
                      replications=2000, seed=5, critval_replications=20_000, ds_replications=20_000)
    table = run_level_study(cfg)
    for row in table.rows:
        se = 100 * np.sqrt(row.level * (1 - row.level) / 2000)
        assert abs(row.reject_pct - 100 * row.level) < 4 * se + 0.5


def test_abort_policy(monkeypatch):
    import censgof.harness as h

    real = h._score_rows

    def failing(X, *args):
        values, ok = real(X, *args)
        ok[:] = False
        return values, ok

    monkeypatch.setattr(h, "_score_rows", failing)
    cfg = StudyConfig("exp", ("gamma(2,1)",), n=20, censor_fraction=0.5, transforms=("MS",),
                      statistics=("A2",), replications=100, critval_replications=1000)
    with pytest.raises(StudyAbortedError):
        run_power_study(cfg)


def test_redraw_recovers_single_failures(monkeypatch):
    import censgof.harness as h

    real = h._score_rows
    calls = {"n": 0}

    def flaky(X, *args):
        values, ok = real(X, *args)
        calls["n"] += 1
        if calls["n"] == 1:
            ok[0] = False
        return values, ok

    monkeypatch.setattr(h, "_score_rows", flaky)
    cfg = StudyConfig("exp", ("gamma(2,1)",), n=20, censor_fraction=0.5, transforms=("MS",),
                      statistics=("A2",), replications=100, critval_replications=1000)
    table = run_power_study(cfg)
    assert calls["n"] == 2 and all(row.failures == 0 for row in table.rows)


def test_null_statistic_sample():
    a = null_statistic_sample("exp(1)", 30, 15, "MS", "W2", 500, seed=1)
    b = null_statistic_sample("exp(1)", 30, 15, "MS", "W2", 500, seed=1)
    assert a.shape == (500,) and np.array_equal(a, b)
    assert not np.array_equal(a, null_statistic_sample("exp(1)", 30, 15, "MS", "W2", 500, seed=2))


def _row(alt, t, s, pct, null="exponential"):
    return PowerRow(null, alt, "1.0", 40, 20, t, s, 0.05, pct, 1000, 0, 0)


def test_rank_summary_synthetic():
    rows = []
    # C2 best, then A2, then W2; MS best, then OS
    for alt, base in (("gamma", 50.0), ("weibull", 30.0)):
        for t, dt in (("MS", 10.0), ("OS", 0.0)):
            for s, ds in (("A2", 2.0), ("W2", 0.0), ("C2", 5.0)):
                rows.append(_row(alt, t, s, base + dt + ds))
    rows.append(_row("exponential", "MS", "A2", 99.0))
    summary = rank_summary([PowerTable(rows)])
    assert summary.scenarios == 2
    assert summary.cell("C2", "MS") == (1, 1)
    assert summary.cell("A2", "OS") == (2, 2)
    assert summary.cell("W2", "MS") == (3, 1)
    for t in summary.transforms:
        assert sorted(summary.test_rank[(s, t)] for s in summary.statistics) == [1, 2, 3]


def test_rank_summary_coverage():
    rows = [_row("gamma", "MS", "A2", 10.0), _row("gamma", "OS", "A2", 20.0), _row("gamma", "MS", "W2", 5.0)]
    with pytest.raises(CoverageError) as info:
        rank_summary([PowerTable(rows)])
    assert "OS" in str(info.value)
    with pytest.raises(CoverageError):
        rank_summary([PowerTable([])])


def test_power_table_lookup_errors(study):
    _, table = study
    with pytest.raises(KeyError):
        table.value(transform="MS")
    assert table.lookup(alternative=parse_family("gamma(4,1)"), transform="LHB", statistic="cf", level=0.05)
