"""Domain types, supply cost and the single-user storage decision.

Units: energy in MWh, prices in $/MWh, storage cost in $/MWh-day
(capital cost spread evenly over the days of the investment horizon).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from toucontract.errors import ConfigError, DataError

HOURS_PER_DAY = 24

CLASS_LABELS = ("F", "P", "N")


@dataclass(frozen=True)
class SystemParams:
    """Quadratic generation cost ``alpha*p^2 + beta*p + gamma`` per hour and the ToU split."""

    alpha: float
    beta: float = 0.0
    gamma: float = 0.0
    hours_peak: int = 7
    hours_offpeak: int = 17

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if self.beta < 0 or self.gamma < 0:
            raise ConfigError("beta and gamma must be non-negative")
        if self.hours_peak < 1 or self.hours_offpeak < 1:
            raise ConfigError("both ToU periods need at least one hour")
        if self.hours_peak + self.hours_offpeak != HOURS_PER_DAY:
            raise ConfigError(
                f"peak + off-peak hours must be {HOURS_PER_DAY}, "
                f"got {self.hours_peak} + {self.hours_offpeak}"
            )

    def marginal_peak(self, load):
        return 2.0 * self.alpha * load / self.hours_peak + self.beta

    def marginal_offpeak(self, load):
        return 2.0 * self.alpha * load / self.hours_offpeak + self.beta


def _period_cost(load, hours: int, params: SystemParams):
    arr = np.asarray(load, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError(f"period load must be non-negative, got {load!r}")
    cost = params.alpha / hours * arr**2 + params.beta * arr + params.gamma * hours
    return float(cost) if cost.ndim == 0 else cost


def supply_cost_peak(load, params: SystemParams):
    """Utility cost of serving ``load`` MWh spread evenly over the peak hours.

    Works elementwise on arrays.
    """
    return _period_cost(load, params.hours_peak, params)


def supply_cost_offpeak(load, params: SystemParams):
    return _period_cost(load, params.hours_offpeak, params)


def no_storage_cost(total_peak, total_offpeak, params: SystemParams):
    return supply_cost_peak(total_peak, params) + supply_cost_offpeak(total_offpeak, params)


@dataclass(frozen=True)
class User:
    id: str
    theta: float
    d_peak: float
    d_offpeak: float
    type_k: int

    def __post_init__(self):
        if self.theta < 0:
            raise ConfigError(f"user {self.id}: storage cost must be non-negative")
        if self.d_peak < 0 or self.d_offpeak < 0:
            raise DataError(f"user {self.id}: demands must be non-negative")


@dataclass(frozen=True)
class StorageType:
    """One storage-cost class with its aggregate daily demands."""

    k: int
    theta: float
    d_peak_agg: float = 0.0
    d_offpeak_agg: float = 0.0

    def __post_init__(self):
        if self.theta < 0:
            raise ConfigError(f"type {self.k}: storage cost must be non-negative")
        if self.d_peak_agg < 0 or self.d_offpeak_agg < 0:
            raise DataError(f"type {self.k}: aggregate demands must be non-negative")


def validate_catalog(catalog: Sequence[StorageType]) -> None:
    """Catalog must be non-empty, indexed 0..K-1 and strictly increasing in cost."""
    if len(catalog) == 0:
        raise ConfigError("empty storage-type catalog")
    for pos, st in enumerate(catalog):
        if st.k != pos:
            raise ConfigError(f"catalog entry {pos} carries index {st.k}")
    thetas = [st.theta for st in catalog]
    for lo, hi in zip(thetas, thetas[1:]):
        if not lo < hi:
            raise ConfigError(f"storage costs must be strictly increasing, got {thetas}")


def make_catalog(thetas, d_peak, d_offpeak) -> list[StorageType]:
    catalog = [
        StorageType(k, float(t), float(p), float(o))
        for k, (t, p, o) in enumerate(zip(thetas, d_peak, d_offpeak))
    ]
    validate_catalog(catalog)
    return catalog


def check_users(users: Sequence[User], catalog: Sequence[StorageType]) -> None:
    seen = set()
    for u in users:
        if u.id in seen:
            raise DataError(f"duplicate user id {u.id!r}")
        seen.add(u.id)
        if not 0 <= u.type_k < len(catalog):
            raise DataError(f"user {u.id}: type {u.type_k} not in catalog")
        if u.theta != catalog[u.type_k].theta:
            raise DataError(
                f"user {u.id}: storage cost {u.theta} differs from its type's {catalog[u.type_k].theta}"
            )


@dataclass(frozen=True)
class TariffItem:
    """One contract item: a price difference, an investment cap and per-user prices.

    ``price_levels`` maps user id to ``(peak_price, offpeak_price)``.
    """

    label: str
    p_delta: float
    eta: float
    price_levels: Mapping[str, tuple[float, float]] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.label not in CLASS_LABELS:
            raise ConfigError(f"unknown item label {self.label!r}")
        if self.p_delta < 0:
            raise ConfigError(f"item {self.label}: negative price difference")
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigError(f"item {self.label}: eta {self.eta} outside [0, 1]")
        for uid, (pp, po) in self.price_levels.items():
            if po < 0 or pp < po:
                raise ConfigError(f"item {self.label}, user {uid}: need p_peak >= p_offpeak >= 0")


@dataclass(frozen=True)
class UserDecision:
    capacity: float
    shift: float


def solve_ucm(user: User, p_delta: float, eta_cap: float = 1.0) -> UserDecision:
    """Cost-minimizing capacity and daily shift for one user.

    All-or-nothing: invest up to the cap when storage is cheaper than the price
    difference, otherwise not at all. Ties go to zero investment.
    """
    if p_delta < 0:
        raise ValueError("price difference must be non-negative")
    if not 0.0 <= eta_cap <= 1.0:
        raise ValueError(f"eta cap {eta_cap} outside [0, 1]")
    if user.theta < p_delta:
        s = eta_cap * user.d_peak
        return UserDecision(s, s)
    return UserDecision(0.0, 0.0)


def bill(user: User, price_pair: tuple[float, float], shift: float) -> float:
    pp, po = price_pair
    return pp * (user.d_peak - shift) + po * (user.d_offpeak + shift)


def user_cost_under_item(user: User, item: TariffItem) -> float:
    """Daily bill plus amortized storage cost after the user's best response to ``item``."""
    try:
        prices = item.price_levels[user.id]
    except KeyError:
        raise KeyError(f"item {item.label} has no price levels for user {user.id!r}") from None
    dec = solve_ucm(user, item.p_delta, item.eta)
    return bill(user, prices, dec.shift) + user.theta * dec.capacity


def equalized_prices(
    d_peak: float, d_offpeak: float, p_delta: float, p_o_ref: float, p_delta_ref: float = 0.0
) -> tuple[float, float]:
    """Peak/off-peak prices with difference ``p_delta`` and a fixed no-storage bill.

    The reference bill is ``p_o_ref*(d_peak + d_offpeak) + p_delta_ref*d_peak``, i.e.
    the bill under prices ``(p_o_ref + p_delta_ref, p_o_ref)``.
    """
    total = d_peak + d_offpeak
    if total == 0:
        # zero bill under any prices; keep the difference identity
        return p_o_ref + p_delta, p_o_ref
    po = p_o_ref + (p_delta_ref - p_delta) * d_peak / total
    return po + p_delta, po


@dataclass(frozen=True)
class DemandPanel:
    """Per-user daily (peak, off-peak) demands over weighted days.

    ``peak`` and ``offpeak`` have shape ``(n_days, n_users)`` in MWh.
    """

    user_ids: tuple[str, ...]
    weights: np.ndarray
    peak: np.ndarray
    offpeak: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        p = np.asarray(self.peak, dtype=float)
        o = np.asarray(self.offpeak, dtype=float)
        if p.ndim != 2 or p.shape != o.shape or p.shape != (len(w), len(self.user_ids)):
            raise DataError(
                f"panel shapes disagree: weights {w.shape}, peak {p.shape}, "
                f"offpeak {o.shape}, users {len(self.user_ids)}"
            )
        if np.any(p < 0) or np.any(o < 0):
            raise DataError("panel demands must be non-negative")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise DataError("panel day weights must be non-negative and sum to 1")
        if len(set(self.user_ids)) != len(self.user_ids):
            raise DataError("duplicate user ids in panel")
        object.__setattr__(self, "user_ids", tuple(self.user_ids))
        for name, arr in (("weights", w), ("peak", p), ("offpeak", o)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_days(self) -> int:
        return len(self.weights)

    def mean_peak(self) -> np.ndarray:
        return self.weights @ self.peak

    def mean_offpeak(self) -> np.ndarray:
        return self.weights @ self.offpeak

    def representative_users(self, type_of, thetas: Sequence[float]) -> list[User]:
        """Users carrying their expected daily demands and their type's storage cost."""
        mp, mo = self.mean_peak(), self.mean_offpeak()
        return [
            User(uid, float(thetas[int(k)]), float(mp[i]), float(mo[i]), int(k))
            for i, (uid, k) in enumerate(zip(self.user_ids, type_of))
        ]
