import math
import warnings

import numpy as np
import pytest

from censgof.critvals import (
    CRITVAL_HEADER,
    CriticalValueTable,
    ensure_critical_values,
    monte_carlo_error,
    simulate_critical_values,
)
from censgof.exceptions import ConfigurationError, PrecisionWarning
from censgof.stats import Statistic


@pytest.fixture(scope="module")
def table():
    return simulate_critical_values(["W2", "A2", "C2"], 30, replications=20_000, seed=3)


def test_quantile_ordering(table):
    for stat in ("W2", "A2", "C2"):
        cv = [table.critical_value(stat, 30, lv) for lv in (0.10, 0.05, 0.01)]
        assert cv[0] <= cv[1] <= cv[2]
    assert table.levels_for("A2", 30) == [0.10, 0.05, 0.01]
    assert table.replications == 20_000 and table.seed == 3


def test_determinism_and_chunk_consistency(table):
    again = simulate_critical_values(["W2", "A2", "C2"], 30, replications=20_000, seed=3)
    assert again == table
    # a single statistic drawn from the same chunks gives the same values
    alone = simulate_critical_values("A2", 30, replications=20_000, seed=3)
    assert alone.entries[(Statistic.A2, 30, 0.05)] == table.entries[(Statistic.A2, 30, 0.05)]
    other = simulate_critical_values("A2", 30, replications=20_000, seed=4)
    assert other.entries[(Statistic.A2, 30, 0.05)] != table.entries[(Statistic.A2, 30, 0.05)]


def test_quantiles_are_empirical_quantiles(table):
    sample = table.null_samples[(Statistic.W2, 30)]
    assert table.critical_value("W2", 30, 0.05) == float(np.quantile(sample, 0.95))
    assert np.all(np.diff(sample) >= 0)


def test_csv_round_trip_is_bit_exact(tmp_path, table):
    path = tmp_path / "cv.csv"
    table.to_csv(path, comments={"command": "test"})
    text = path.read_text()
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    assert lines[0] == ",".join(CRITVAL_HEADER)
    assert "# cf_weight = 0.5" in text and "# command = test" in text
    back = CriticalValueTable.from_csv(path)
    assert back == table
    for key, val in table.entries.items():
        assert back.entries[key][0] == val[0]
    path2 = tmp_path / "cv2.csv"
    back.to_csv(path2, comments={"command": "test"})
    assert path2.read_text() == text


def test_rounded_csv(tmp_path, table):
    path = tmp_path / "cv.csv"
    table.to_csv(path, exact=False)
    back = CriticalValueTable.from_csv(path)
    for key, val in table.entries.items():
        assert back.entries[key][0] == pytest.approx(val[0], abs=5e-7)
        assert len(str(back.entries[key][0]).split(".")[1]) <= 6


def test_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ConfigurationError):
        CriticalValueTable.from_csv(path)


def test_precision_warning():
    with pytest.warns(PrecisionWarning):
        simulate_critical_values("W2", 10, levels=(0.01,), replications=10, seed=0)
    with warnings.catch_warnings():
        warnings.simplefilter("error", PrecisionWarning)
        simulate_critical_values("W2", 10, levels=(0.01,), replications=1000, seed=0)


def test_errors():
    with pytest.raises(ConfigurationError):
        simulate_critical_values(["W2", "DS_A2"], 10)
    with pytest.raises(ConfigurationError):
        simulate_critical_values("DS_A2", 10, replications=1000)
    with pytest.raises(ConfigurationError):
        simulate_critical_values("DS_A2", 10, replications=1000, n=20, null_family="gamma")
    with pytest.raises(ConfigurationError):
        simulate_critical_values("W2", 10, levels=(1.5,), replications=100)
    with pytest.raises(ConfigurationError):
        CriticalValueTable().critical_value("W2", 10, 0.05)
    a = CriticalValueTable(meta={"cf_weight": 0.5})
    with pytest.raises(ConfigurationError):
        a.merge(CriticalValueTable(meta={"cf_weight": 1.0}))


def test_ds_tables_carry_context():
    t = simulate_critical_values(["DS_A2", "DS_W2"], 20, replications=20_000, seed=1, n=40, null_family="exp")
    assert t.meta == {"n": 40, "null": "exponential"}
    # 10^6-replication reproduction lives in the acceptance suite
    assert t.critical_value("DS_A2", 20, 0.05) == pytest.approx(0.609, abs=0.03)
    assert t.critical_value("DS_W2", 20, 0.05) == pytest.approx(0.081, abs=0.005)


def test_ensure_critical_values_fills_gaps(table):
    out = ensure_critical_values(table, ["W2"], 30, (0.05,), 1000, 9)
    assert out.entries[(Statistic.W2, 30, 0.05)] == table.entries[(Statistic.W2, 30, 0.05)]
    out = ensure_critical_values(table, ["W2"], 12, (0.05,), 1000, 9)
    assert (Statistic.W2, 12, 0.05) in out.entries and (Statistic.A2, 30, 0.05) in out.entries


def test_monte_carlo_error():
    assert monte_carlo_error(0.05, 10_000) == pytest.approx(math.sqrt(0.0475) / 100)
