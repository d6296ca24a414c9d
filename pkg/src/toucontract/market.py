"""Decentralized response of users to a published contract.

Each user picks the item that minimizes its own daily cost, then invests per the
all-or-nothing rule under that item's cap. Item choice is made once, on the
user's representative demand; daily dispatch then follows realized demand.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from toucontract.contract import IC_RTOL, Contract
from toucontract.errors import DataError
from toucontract.model import (
    CLASS_LABELS,
    DemandPanel,
    SystemParams,
    User,
    UserDecision,
    no_storage_cost,
    solve_ucm,
    supply_cost_offpeak,
    supply_cost_peak,
    user_cost_under_item,
)
from toucontract.scm import SocialOutcome

AGGREGATE_RTOL = 1e-6


def choose_item(contract: Contract, user: User) -> str:
    """Cheapest item for ``user``; ties go to its intended item, else the lowest cap."""
    costs = {lab: user_cost_under_item(user, contract.item(lab)) for lab in CLASS_LABELS}
    best = min(costs.values())
    tol = IC_RTOL * max(1.0, abs(best))
    minimizers = [lab for lab in CLASS_LABELS if costs[lab] <= best + tol]
    intended = contract.intended(user)
    if intended in minimizers:
        return intended
    return min(minimizers, key=lambda lab: (contract.item(lab).eta, CLASS_LABELS.index(lab)))


def choose_items(contract: Contract, users: Sequence[User]) -> dict[str, str]:
    return {u.id: choose_item(contract, u) for u in users}


@dataclass(frozen=True)
class SimulationResult:
    outcome: SocialOutcome
    choices: dict = field(compare=False)
    decisions: dict = field(compare=False)
    peak_load: float
    offpeak_load: float
    original_peak: float
    original_offpeak: float
    no_storage_cost: float

    @property
    def class_counts(self) -> dict[str, int]:
        counts = dict.fromkeys(CLASS_LABELS, 0)
        for lab in self.choices.values():
            counts[lab] += 1
        return counts


def _check_aggregates(users: Sequence[User], scenario, n_types: int) -> None:
    peak = np.zeros(n_types)
    off = np.zeros(n_types)
    for u in users:
        peak[u.type_k] += u.d_peak
        off[u.type_k] += u.d_offpeak
    want_peak, want_off = (np.asarray(x, dtype=float) for x in scenario)
    for name, got, want in (("peak", peak, want_peak), ("off-peak", off, want_off)):
        if not np.allclose(got, want, rtol=AGGREGATE_RTOL, atol=1e-12):
            warnings.warn(f"user {name} demands {got} disagree with scenario aggregates {want}", stacklevel=3)


def simulate(
    contract: Contract,
    users: Sequence[User],
    params: SystemParams,
    scenario: Optional[tuple] = None,
    choices: Optional[dict[str, str]] = None,
) -> SimulationResult:
    """One day of decentralized behaviour under ``contract``.

    ``scenario`` is an optional ``(peak_per_type, offpeak_per_type)`` pair; a
    mismatch with the users' own demands only warns. ``choices`` pins the item
    each user holds (otherwise users choose now).
    """
    K = len(contract.thetas)
    if scenario is not None:
        _check_aggregates(users, scenario, K)
    if choices is None:
        choices = choose_items(contract, users)
    decisions: dict[str, UserDecision] = {}
    cap = np.zeros(K)
    shift = np.zeros(K)
    storage = 0.0
    peak0 = off0 = 0.0
    for u in users:
        item = contract.item(choices[u.id])
        dec = solve_ucm(u, item.p_delta, item.eta)
        decisions[u.id] = dec
        cap[u.type_k] += dec.capacity
        shift[u.type_k] += dec.shift
        storage += u.theta * dec.capacity
        peak0 += u.d_peak
        off0 += u.d_offpeak
    total_shift = float(shift.sum())
    peak = max(peak0 - total_shift, 0.0)
    off = off0 + total_shift
    outcome = SocialOutcome(
        capacity=tuple(float(c) for c in cap),
        shift=tuple(float(s) for s in shift),
        cost_storage=storage,
        cost_peak=supply_cost_peak(peak, params),
        cost_offpeak=supply_cost_offpeak(off, params),
    )
    return SimulationResult(
        outcome, choices, decisions, peak, off, peak0, off0, no_storage_cost(peak0, off0, params)
    )


@dataclass(frozen=True)
class ExpectedOutcome:
    expected_cost: float
    expected_no_storage: float
    daily_cost: np.ndarray = field(compare=False)
    daily_no_storage: np.ndarray = field(compare=False)
    choices: dict = field(compare=False)
    invest_ratio: np.ndarray = field(compare=False)

    @property
    def kappa_no(self) -> float:
        return self.expected_no_storage / self.expected_cost


def simulate_expected(
    contract: Contract,
    users: Sequence[User],
    params: SystemParams,
    panel: DemandPanel,
    capacity: str = "per_day",
) -> ExpectedOutcome:
    """Expected social cost over the panel's weighted days.

    Items are chosen once from ``users`` (representative demands). With
    ``capacity="per_day"`` a user shifts its item's cap times each day's peak
    demand and pays storage on that amount, which is the cost model the
    contract plan optimizes. ``capacity="fixed"`` sizes storage once on the
    representative peak demand and caps each day's shift at realized demand.
    """
    index = {uid: i for i, uid in enumerate(panel.user_ids)}
    if len(users) != panel.n_users or any(u.id not in index for u in users):
        raise DataError("users and panel cover different user ids")
    order = [index[u.id] for u in users]
    P = panel.peak[:, order]
    O = panel.offpeak[:, order]
    theta = np.array([u.theta for u in users])

    choices = choose_items(contract, users)
    ratio = np.zeros(len(users))
    for i, u in enumerate(users):
        item = contract.item(choices[u.id])
        if u.theta < item.p_delta:
            ratio[i] = item.eta

    if capacity == "per_day":
        S = P * ratio
        storage = S @ theta
    elif capacity == "fixed":
        cap = ratio * np.array([u.d_peak for u in users])
        S = np.minimum(cap, P)
        storage = np.full(panel.n_days, float(theta @ cap))
    else:
        raise ValueError(f"unknown capacity mode {capacity!r}")

    peak0 = P.sum(axis=1)
    off0 = O.sum(axis=1)
    shifted = S.sum(axis=1)
    daily = storage + no_storage_cost(np.maximum(peak0 - shifted, 0.0), off0 + shifted, params)
    daily_none = no_storage_cost(peak0, off0, params)
    w = panel.weights
    return ExpectedOutcome(float(w @ daily), float(w @ daily_none), daily, daily_none, choices, ratio)


def kappa_no(contract: Contract, users: Sequence[User], params: SystemParams, panel: DemandPanel) -> float:
    """Expected no-storage social cost over expected cost under ``contract``."""
    out = simulate_expected(contract, users, params, panel)
    if not out.expected_cost > 0:
        raise ValueError("expected social cost under the contract is zero")
    return out.kappa_no
