"""Hourly household data to per-user daily peak / off-peak demands.

CSV schema (one row per user-hour)::

    timestamp,user_id,load_kwh,solar_kwh
    2019-01-01T00:00:00,u01,0.62,0.0

Energies arrive in kWh and are converted to MWh on ingestion. A day is the
calendar date of the timestamp; hour ``h`` is the slot starting at ``h:00``.
"""

from __future__ import annotations

import csv
import logging
from collections import defaultdict
from dataclasses import dataclass
from datetime import date, datetime
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from toucontract.errors import ConfigError, DataError
from toucontract.model import HOURS_PER_DAY, DemandPanel

log = logging.getLogger(__name__)

KWH_PER_MWH = 1000.0

DEFAULT_SCHEMA = {
    "timestamp": "timestamp",
    "user_id": "user_id",
    "load": "load_kwh",
    "solar": "solar_kwh",
}

# slots labelled 18:00 through 00:00 (seven hours); 01:00-17:00 is off-peak
DEFAULT_PEAK_HOURS = (0, 18, 19, 20, 21, 22, 23)


@dataclass(frozen=True)
class HourlyData:
    """Complete 24-slot days shared by all users; arrays are ``(days, users, 24)`` in MWh."""

    user_ids: tuple[str, ...]
    days: tuple[date, ...]
    load: np.ndarray
    solar: np.ndarray
    n_records: int
    dropped_user_days: tuple[tuple[str, date], ...] = ()
    dropped_days: tuple[date, ...] = ()


def _parse_timestamp(text: str) -> datetime:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.minute or ts.second or ts.microsecond:
        raise ValueError(f"timestamp {text!r} is not on the hour")
    return ts


def _parse_energy(text: str, what: str) -> float:
    value = float(text)
    if not np.isfinite(value) or value < 0:
        raise ValueError(f"{what} must be finite and non-negative, got {text!r}")
    return value


def ingest_csv(path, schema: Optional[Mapping[str, str]] = None) -> HourlyData:
    """Read and validate an hourly load/solar CSV.

    User-days missing any hour are dropped; days not complete for every user
    are then dropped too, since each kept day becomes one joint scenario.
    """
    schema = {**DEFAULT_SCHEMA, **(schema or {})}
    slots: dict[tuple[str, date], dict[int, tuple[float, float]]] = defaultdict(dict)
    n_rows = 0
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        reader = csv.DictReader(fh)
        missing = [c for c in schema.values() if c not in (reader.fieldnames or [])]
        if missing:
            raise DataError(f"{path}: missing columns {missing}")
        for row in reader:
            line = reader.line_num
            try:
                ts = _parse_timestamp(row[schema["timestamp"]])
                uid = row[schema["user_id"]].strip()
                if not uid:
                    raise ValueError("empty user id")
                load = _parse_energy(row[schema["load"]], "load")
                solar = _parse_energy(row[schema["solar"]], "solar")
            except (TypeError, ValueError, AttributeError) as exc:
                raise DataError(f"{path}:{line}: {exc}") from None
            day_slots = slots[(uid, ts.date())]
            if ts.hour in day_slots:
                raise DataError(f"{path}:{line}: duplicate record for user {uid!r} at {ts.isoformat()}")
            day_slots[ts.hour] = (load / KWH_PER_MWH, solar / KWH_PER_MWH)
            n_rows += 1

    users = sorted({uid for uid, _ in slots})
    all_days = sorted({d for _, d in slots})
    dropped = []
    for key, day_slots in sorted(slots.items()):
        if len(day_slots) != HOURS_PER_DAY:
            dropped.append(key)
            log.info("dropping user %s on %s: %d of 24 hours", key[0], key[1], len(day_slots))
    dropped_set = set(dropped)
    days, bad_days = [], []
    for d in all_days:
        if all((u, d) in slots and (u, d) not in dropped_set for u in users):
            days.append(d)
        else:
            bad_days.append(d)
    if bad_days:
        log.info("dropping %d day(s) incomplete for some user", len(bad_days))

    load = np.zeros((len(days), len(users), HOURS_PER_DAY))
    solar = np.zeros_like(load)
    for i, d in enumerate(days):
        for j, u in enumerate(users):
            for h, (l, s) in slots[(u, d)].items():
                load[i, j, h] = l
                solar[i, j, h] = s
    return HourlyData(tuple(users), tuple(days), load, solar, n_rows, tuple(dropped), tuple(bad_days))


def net_load(load, solar, curtail: bool = True, solar_scale: float = 1.0) -> np.ndarray:
    """Load minus scaled solar; surplus solar is curtailed (clipped at 0) unless ``curtail`` is off."""
    load = np.asarray(load, dtype=float)
    solar = np.asarray(solar, dtype=float)
    if load.shape != solar.shape:
        raise DataError(f"load {load.shape} and solar {solar.shape} are not aligned")
    if solar_scale < 0:
        raise ConfigError("solar scale must be non-negative")
    net = load - solar_scale * solar
    return np.maximum(net, 0.0) if curtail else net


def validate_peak_hours(peak_hours: Iterable[int]) -> tuple[int, ...]:
    hours = tuple(sorted(int(h) for h in peak_hours))
    if len(set(hours)) != len(hours):
        raise ConfigError(f"duplicate hours in peak window {hours}")
    if any(not 0 <= h < HOURS_PER_DAY for h in hours):
        raise ConfigError(f"peak window hours must lie in 0..23, got {hours}")
    if not 0 < len(hours) < HOURS_PER_DAY:
        raise ConfigError("peak window must be a non-empty strict subset of the day")
    return hours


def aggregate_periods(series, peak_hours: Iterable[int] = DEFAULT_PEAK_HOURS):
    """Sum the trailing 24-hour axis into ``(peak, offpeak)`` totals."""
    hours = validate_peak_hours(peak_hours)
    series = np.asarray(series, dtype=float)
    if series.shape[-1] != HOURS_PER_DAY:
        raise DataError(f"last axis must have 24 hourly slots, got {series.shape}")
    mask = np.zeros(HOURS_PER_DAY, dtype=bool)
    mask[list(hours)] = True
    return series[..., mask].sum(axis=-1), series[..., ~mask].sum(axis=-1)


def build_panel(
    hourly: HourlyData,
    peak_hours: Iterable[int] = DEFAULT_PEAK_HOURS,
    solar_scale: float = 1.0,
    curtail: bool = True,
    demand_scale: float = 1.0,
) -> DemandPanel:
    """Per-user daily demands with one equally weighted scenario per valid day.

    ``demand_scale`` multiplies every demand, e.g. to let each metered household
    stand for many identical ones when utility-scale cost coefficients are used.
    """
    if not demand_scale > 0:
        raise ConfigError("demand scale must be positive")
    if len(hourly.days) == 0:
        raise DataError("no complete days in the data")
    net = net_load(hourly.load, hourly.solar, curtail, solar_scale) * demand_scale
    peak, off = aggregate_periods(net, peak_hours)
    if np.any(peak < 0) or np.any(off < 0):
        raise DataError("negative period demand; signed net load needs curtailment for planning")
    n = len(hourly.days)
    return DemandPanel(hourly.user_ids, np.full(n, 1.0 / n), peak, off)


def sample_type_groupings(n_users: int, n_types: int, n_groupings: int, seed) -> list[np.ndarray]:
    """Random user->type maps with every type non-empty.

    A random permutation seeds each type with one user; the rest are assigned
    uniformly. Deterministic for a given seed.
    """
    if n_types < 1:
        raise ConfigError("need at least one type")
    if n_types > n_users:
        raise ConfigError(f"cannot split {n_users} users into {n_types} non-empty types")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_groupings):
        perm = rng.permutation(n_users)
        type_of = np.empty(n_users, dtype=int)
        type_of[perm[:n_types]] = np.arange(n_types)
        type_of[perm[n_types:]] = rng.integers(0, n_types, n_users - n_types)
        out.append(type_of)
    return out


def build_theta_catalog(theta_bar: float, lambda_s: float) -> list[float]:
    """Four storage costs spread symmetrically around ``theta_bar`` with diversity ``lambda_s``."""
    if not theta_bar > 0:
        raise ConfigError("mean storage cost must be positive")
    if not 0 < lambda_s < 2.0 / 3.0:
        raise ConfigError(f"cost diversity must lie in (0, 2/3), got {lambda_s}")
    return [theta_bar * (1.0 + m * lambda_s) for m in (-1.5, -0.5, 0.5, 1.5)]


def synthetic_hourly(
    n_users: int = 40,
    n_days: int = 60,
    seed: int = 0,
    start: date = date(2019, 1, 1),
) -> HourlyData:
    """Seeded household load and rooftop solar with an evening peak.

    Loads combine a night base, a morning bump and an evening peak around
    19:00-21:00, scaled per household and by a shared daily weather factor.
    Solar is a bell over 07:00-18:00 scaled by system size and daily cloudiness.
    """
    rng = np.random.default_rng(seed)
    hours = np.arange(HOURS_PER_DAY)
    shape = (
        0.45
        + 0.35 * np.exp(-0.5 * ((hours - 7.5) / 1.2) ** 2)
        + 1.6 * np.exp(-0.5 * ((hours - 20.0) / 2.0) ** 2)
        + 0.25 * np.exp(-0.5 * ((hours - 13.0) / 3.0) ** 2)
    )
    sun = np.clip(np.sin(np.pi * (hours - 6.5) / 12.0), 0.0, None) ** 1.5

    size = rng.lognormal(0.0, 0.3, n_users)
    pv_kw = rng.choice([0.0, 3.0, 5.0, 7.0], size=n_users, p=[0.2, 0.3, 0.3, 0.2])
    weather = rng.lognormal(0.0, 0.12, n_days)
    clear = rng.beta(5.0, 2.0, n_days)

    load = np.empty((n_days, n_users, HOURS_PER_DAY))
    solar = np.empty_like(load)
    for d in range(n_days):
        noise = rng.lognormal(0.0, 0.15, (n_users, HOURS_PER_DAY))
        load[d] = weather[d] * size[:, None] * shape[None, :] * noise
        solar[d] = clear[d] * pv_kw[:, None] * sun[None, :] * rng.uniform(0.85, 1.0, (n_users, 1))
    days = tuple(date.fromordinal(start.toordinal() + d) for d in range(n_days))
    ids = tuple(f"u{j:02d}" for j in range(n_users))
    return HourlyData(ids, days, load / KWH_PER_MWH, solar / KWH_PER_MWH, n_days * n_users * HOURS_PER_DAY)


def write_csv(hourly: HourlyData, path) -> None:
    """Write hourly data back out in the ingestion schema (kWh)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(DEFAULT_SCHEMA.values()))
        for i, d in enumerate(hourly.days):
            for j, uid in enumerate(hourly.user_ids):
                for h in range(HOURS_PER_DAY):
                    ts = datetime(d.year, d.month, d.day, h).isoformat()
                    w.writerow(
                        [
                            ts,
                            uid,
                            repr(float(hourly.load[i, j, h] * KWH_PER_MWH)),
                            repr(float(hourly.solar[i, j, h] * KWH_PER_MWH)),
                        ]
                    )
