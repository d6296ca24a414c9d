import logging
from datetime import date
from pathlib import Path

import numpy as np
import pytest

from toucontract import ConfigError, DataError, ScenarioSet, SystemParams
from toucontract.data import (
    DEFAULT_PEAK_HOURS,
    aggregate_periods,
    build_panel,
    build_theta_catalog,
    ingest_csv,
    net_load,
    sample_type_groupings,
    synthetic_hourly,
    write_csv,
)

FIXTURE = Path(__file__).parent / "data" / "households.csv"

# per-day, per-user (peak, off-peak) net MWh from a separate pandas pass over the fixture
FIXTURE_PEAK = np.array([[0.01065, 0.01205, 0.01345], [0.01135, 0.01275, 0.01415]])
FIXTURE_OFFPEAK = np.array([[0.00655, 0.01615, 0.01225], [0.00785, 0.01785, 0.01385]])
FIXTURE_DAY_TOTALS = np.array([0.0711, 0.0778])


def write_rows(path, rows):
    lines = ["timestamp,user_id,load_kwh,solar_kwh"] + [",".join(map(str, r)) for r in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def full_days(users=("a", "b"), days=("2019-01-01", "2019-01-02"), skip=()):
    rows = []
    for d in days:
        for u in users:
            for h in range(24):
                if (u, d, h) not in skip:
                    rows.append((f"{d}T{h:02d}:00:00", u, 1.0, 0.0))
    return rows


def test_two_users_two_days(tmp_path):
    hourly = ingest_csv(write_rows(tmp_path / "x.csv", full_days()))
    assert hourly.n_records == 96
    assert hourly.load.shape == (2, 2, 24)
    assert hourly.user_ids == ("a", "b")
    assert hourly.dropped_days == ()


def test_missing_hour_drops_user_day_and_day(tmp_path, caplog):
    rows = full_days(skip={("b", "2019-01-02", 13)})
    with caplog.at_level(logging.INFO, logger="toucontract.data"):
        hourly = ingest_csv(write_rows(tmp_path / "x.csv", rows))
    assert hourly.dropped_user_days == (("b", date(2019, 1, 2)),)
    assert hourly.days == (date(2019, 1, 1),)
    assert hourly.dropped_days == (date(2019, 1, 2),)
    assert "dropping user b" in caplog.text


def test_malformed_row_reports_line(tmp_path):
    rows = full_days()
    rows[4] = (rows[4][0], "a", "abc", 0.0)
    with pytest.raises(DataError, match=r"x\.csv:6:"):
        ingest_csv(write_rows(tmp_path / "x.csv", rows))


def test_negative_energy_and_bad_timestamp(tmp_path):
    rows = full_days()
    rows[0] = (rows[0][0], "a", -1.0, 0.0)
    with pytest.raises(DataError, match=":2:"):
        ingest_csv(write_rows(tmp_path / "x.csv", rows))
    rows = full_days()
    rows[1] = ("2019-01-01T00:30:00", "a", 1.0, 0.0)
    with pytest.raises(DataError, match="on the hour"):
        ingest_csv(write_rows(tmp_path / "y.csv", rows))


def test_duplicate_user_hour(tmp_path):
    rows = full_days()
    rows.append(rows[0])
    with pytest.raises(DataError, match="duplicate"):
        ingest_csv(write_rows(tmp_path / "x.csv", rows))


def test_missing_column(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("timestamp,user_id,load_kwh\n2019-01-01T00:00:00,a,1\n")
    with pytest.raises(DataError, match="solar_kwh"):
        ingest_csv(path)


def test_custom_schema(tmp_path):
    path = tmp_path / "x.csv"
    lines = ["time,meter,kwh,pv"] + [f"2019-01-01T{h:02d}:00:00,m1,1.0,0.5" for h in range(24)]
    path.write_text("\n".join(lines) + "\n")
    hourly = ingest_csv(path, {"timestamp": "time", "user_id": "meter", "load": "kwh", "solar": "pv"})
    assert hourly.load.sum() == pytest.approx(0.024)


def test_fixture_totals():
    hourly = ingest_csv(FIXTURE)
    assert hourly.n_records == 215
    assert hourly.days == (date(2019, 7, 1), date(2019, 7, 2))
    panel = build_panel(hourly)
    np.testing.assert_allclose(panel.peak, FIXTURE_PEAK, rtol=1e-12)
    np.testing.assert_allclose(panel.offpeak, FIXTURE_OFFPEAK, rtol=1e-12)
    np.testing.assert_allclose(panel.weights, [0.5, 0.5])


def test_fixture_conservation():
    hourly = ingest_csv(FIXTURE)
    panel = build_panel(hourly)
    days = (panel.peak + panel.offpeak).sum(axis=1)
    np.testing.assert_allclose(days, FIXTURE_DAY_TOTALS, atol=1e-9)
    net = net_load(hourly.load, hourly.solar).sum(axis=(1, 2))
    np.testing.assert_allclose(days, net, atol=1e-9)


def test_net_load():
    assert net_load(5.0, 2.0) == 3.0
    assert net_load(1.0, 4.0) == 0.0
    assert net_load(1.0, 4.0, curtail=False) == -3.0
    # solar doubled before netting
    assert net_load(5.0, 2.0, solar_scale=2.0) == 1.0
    with pytest.raises(DataError):
        net_load(np.ones(3), np.ones(4))


def test_aggregate_constant_user():
    peak, off = aggregate_periods(np.full(24, 0.001))
    assert peak == pytest.approx(0.007)
    assert off == pytest.approx(0.017)


def test_default_window_feeds_system_params():
    hours = len(DEFAULT_PEAK_HOURS)
    params = SystemParams(1.0, hours_peak=hours, hours_offpeak=24 - hours)
    assert (params.hours_peak, params.hours_offpeak) == (7, 17)


@pytest.mark.parametrize("window", [[], list(range(24)), [3, 3], [24]])
def test_bad_windows(window):
    with pytest.raises(ConfigError):
        aggregate_periods(np.ones(24), window)


def test_signed_net_load_cannot_be_planned():
    hourly = ingest_csv(FIXTURE)
    with pytest.raises(DataError, match="curtailment"):
        build_panel(hourly, solar_scale=50.0, curtail=False)


def test_groupings_singletons_when_k_equals_n():
    for type_of in sample_type_groupings(6, 6, 5, seed=3):
        assert sorted(type_of) == list(range(6))


def test_groupings_deterministic_and_nonempty():
    a = sample_type_groupings(40, 4, 20, seed=7)
    b = sample_type_groupings(40, 4, 20, seed=7)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert all(np.bincount(g, minlength=4).min() >= 1 for g in a)
    with pytest.raises(ConfigError):
        sample_type_groupings(3, 4, 1, seed=0)


def test_groupings_near_uniform_type_sizes():
    groupings = sample_type_groupings(40, 4, 1000, seed=11)
    counts = np.array([np.bincount(g, minlength=4) for g in groupings]).sum(axis=0)
    expected = counts.sum() / 4
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    # 3 degrees of freedom; 16.27 is the 0.999 quantile
    assert chi2 < 16.27


def test_theta_catalog():
    assert build_theta_catalog(60.0, 1.0 / 3.0) == pytest.approx([30.0, 50.0, 70.0, 90.0])
    for bad in (0.0, 2.0 / 3.0, -0.1):
        with pytest.raises(ConfigError):
            build_theta_catalog(60.0, bad)
    with pytest.raises(ConfigError):
        build_theta_catalog(0.0, 0.2)


def test_synthetic_data_round_trips_through_csv(tmp_path):
    hourly = synthetic_hourly(n_users=3, n_days=2, seed=5)
    path = tmp_path / "syn.csv"
    write_csv(hourly, path)
    back = ingest_csv(path)
    np.testing.assert_allclose(back.load, hourly.load, rtol=1e-12)
    np.testing.assert_allclose(back.solar, hourly.solar, rtol=1e-12)
    evening = hourly.load[:, :, 19:22].mean()
    assert evening > hourly.load[:, :, 2:5].mean()


def test_scenario_serialization_is_deterministic():
    def build():
        hourly = synthetic_hourly(n_users=8, n_days=5, seed=2)
        panel = build_panel(hourly, demand_scale=1000.0)
        type_of = sample_type_groupings(8, 4, 1, seed=9)[0]
        return ScenarioSet.from_panel(panel, type_of, 4).dumps()

    assert build() == build()
