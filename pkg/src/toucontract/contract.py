"""Three-item contracts (price difference, investment cap) and their IC check.

Given a full / partial / none classification of storage types, each item
``(p_delta, eta)`` targets one class. The price differences must sit inside
a coupled open region so that every user strictly prefers the item meant for
its class and invests up to that item's cap. Notation inside this module:

* ``theta_a``: costliest full type (0 when there is none)
* ``theta_b``: the partial type (replaced by ``theta_c`` with ``eta_p = 0`` when there is none)
* ``theta_c``: cheapest active none type (``inf`` when there is none)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from toucontract.errors import ConfigError, DataError, InfeasibleError
from toucontract.model import (
    CLASS_LABELS,
    StorageType,
    TariffItem,
    User,
    check_users,
    equalized_prices,
    solve_ucm,
    user_cost_under_item,
    validate_catalog,
)
from toucontract.scm import Classification

CONTRACT_HEADER = "# toucontract-contract v1"
DEFAULT_P_O_REF = 20.0
IC_RTOL = 1e-9


@dataclass(frozen=True)
class PriceDifferenceIntervals:
    theta_a: float
    theta_b: float
    theta_c: float
    eta_p: float
    has_full: bool
    has_partial: bool
    has_none: bool

    @staticmethod
    def _cap(lo: float, hi: float) -> float:
        # finite stand-in for an unbounded upper end
        return hi if math.isfinite(hi) else 2.0 * lo + 1.0

    def partial_interval(self) -> Optional[tuple[float, float]]:
        if not self.has_partial:
            return None
        return self.theta_b, self.theta_c

    def full_condition(self, p_partial: float) -> tuple[float, float]:
        """Bounds on the full item's price difference taken alone, for a given partial price."""
        if not self.has_partial:
            return self.theta_a, self.theta_c
        eta = self.eta_p
        lo = eta * self.theta_b + (1.0 - eta) * self.theta_a
        hi = (p_partial - self.theta_b) * eta + self.theta_b
        return lo, hi

    def full_interval(self, p_partial: float) -> Optional[tuple[float, float]]:
        """Full-item bounds jointly with the coupled partial-item condition."""
        if not self.has_full:
            return None
        lo, hi = self.full_condition(p_partial)
        if self.has_partial:
            # partial condition p_P < p_F/eta - theta_a(1-eta)/eta, solved for p_F
            lo = max(lo, self.eta_p * p_partial + (1.0 - self.eta_p) * self.theta_a)
        return lo, hi

    def contains(self, p_full: float, p_partial: float, p_none: float) -> bool:
        """Direct substitution into all three conditions; absent classes impose none."""
        if not p_none >= 0:
            return False
        if self.has_partial:
            hi = self.theta_c
            if self.has_full:
                eta = self.eta_p
                hi = min(hi, p_full / eta - self.theta_a * (1.0 - eta) / eta)
            if not self.theta_b < p_partial < hi:
                return False
        if self.has_full:
            lo, hi = self.full_condition(p_partial)
            if not lo < p_full < hi:
                return False
        return True

    def margin(self, p_full: float, p_partial: float) -> float:
        """Smallest distance from the point to a bound of the region (inf if unconstrained)."""
        gaps = [math.inf]
        if self.has_partial:
            lo, hi = self.theta_b, self.theta_c
            gaps += [p_partial - lo, hi - p_partial]
        if self.has_full:
            lo, hi = self.full_interval(p_partial)
            gaps += [p_full - lo, hi - p_full]
        return min(gaps)


def price_difference_intervals(classification: Classification, catalog: Sequence[StorageType]) -> PriceDifferenceIntervals:
    validate_catalog(catalog)
    if classification.n_types != len(catalog):
        raise ConfigError("classification and catalog sizes differ")
    thetas = [st.theta for st in catalog]
    skip = set(classification.inactive)
    active_none = [thetas[k] for k in classification.none if k not in skip]
    theta_a = max((thetas[k] for k in classification.full), default=0.0)
    theta_c = min(active_none, default=math.inf)
    has_partial = classification.partial is not None
    if has_partial:
        theta_b, eta_p = thetas[classification.partial], float(classification.partial_ratio)
    else:
        theta_b, eta_p = theta_c, 0.0
    out = PriceDifferenceIntervals(
        theta_a,
        theta_b,
        theta_c,
        eta_p,
        has_full=bool(classification.full),
        has_partial=has_partial,
        has_none=bool(active_none),
    )
    # the coupled region is non-empty iff the present classes are strictly cost-ordered
    chain = ([theta_a] if out.has_full else []) + ([theta_b] if has_partial else []) + [theta_c]
    if not all(lo < hi for lo, hi in zip(chain, chain[1:])):
        raise InfeasibleError(f"empty price-difference region for class costs {chain}")
    return out


def select_point(intervals: PriceDifferenceIntervals) -> tuple[float, float, float]:
    """Midpoint price differences ``(p_full, p_partial, p_none)``.

    Partial first (midpoint of its outer interval), then full inside the interval
    that partial choice induces. Absent classes get a price difference of 0.
    """
    p_partial = 0.0
    if intervals.has_partial:
        lo, hi = intervals.partial_interval()
        p_partial = 0.5 * (lo + intervals._cap(lo, hi))
    p_full = 0.0
    if intervals.has_full:
        lo, hi = intervals.full_interval(p_partial)
        if not lo < hi:
            raise InfeasibleError(f"empty full interval ({lo}, {hi}) at p_partial={p_partial}")
        p_full = 0.5 * (lo + intervals._cap(lo, hi))
    point = (p_full, p_partial, 0.0)
    if not intervals.contains(*point):
        raise InfeasibleError(f"selected point {point} violates the region {intervals}")
    return point


@dataclass(frozen=True)
class Contract:
    items: tuple[TariffItem, TariffItem, TariffItem]
    classification: Classification
    thetas: tuple[float, ...]
    flags: tuple[str, ...] = ()

    def item(self, label: str) -> TariffItem:
        return self.items[CLASS_LABELS.index(label)]

    def intended(self, user: User) -> str:
        return self.classification.label(user.type_k)

    @property
    def price_differences(self) -> tuple[float, float, float]:
        return tuple(it.p_delta for it in self.items)

    def dumps(self) -> str:
        c = self.classification
        lines = [
            CONTRACT_HEADER,
            "types.theta = " + ",".join(repr(float(t)) for t in self.thetas),
            "class.F = " + ",".join(map(str, c.full)),
            "class.P = " + ("" if c.partial is None else str(c.partial)),
            "class.P.ratio = " + ("" if c.partial_ratio is None else repr(float(c.partial_ratio))),
            "class.N = " + ",".join(map(str, c.none)),
            "class.inactive = " + ",".join(map(str, c.inactive)),
        ]
        for it in self.items:
            lines.append(f"item.{it.label}.p_delta = {float(it.p_delta)!r}")
            lines.append(f"item.{it.label}.eta = {float(it.eta)!r}")
        for flag in self.flags:
            lines.append(f"flag = {flag}")
        for it in self.items:
            for uid, (pp, po) in it.price_levels.items():
                lines.append(f"price.{it.label}.{uid} = {float(pp)!r},{float(po)!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "Contract":
        lines = text.splitlines()
        if not lines or lines[0].strip() != CONTRACT_HEADER:
            raise DataError("missing contract version header")
        kv: dict[str, str] = {}
        flags: list[str] = []
        prices: dict[str, dict[str, tuple[float, float]]] = {lab: {} for lab in CLASS_LABELS}
        for n, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            key, sep, value = line.partition(" = ")
            if not sep:
                # trailing space is dropped when the value is empty
                key, sep, value = line.rstrip().partition(" =")
                if not sep or value:
                    raise DataError(f"line {n}: expected 'key = value'")
            if key == "flag":
                flags.append(value)
            elif key.startswith("price."):
                _, label, uid = key.split(".", 2)
                pp, po = value.split(",")
                prices[label][uid] = (float(pp), float(po))
            else:
                kv[key] = value

        def ints(s: str) -> tuple[int, ...]:
            return tuple(int(x) for x in s.split(",") if x)

        try:
            thetas = tuple(float(x) for x in kv["types.theta"].split(","))
            classification = Classification(
                len(thetas),
                ints(kv["class.F"]),
                int(kv["class.P"]) if kv["class.P"] else None,
                float(kv["class.P.ratio"]) if kv["class.P.ratio"] else None,
                ints(kv["class.N"]),
                ints(kv["class.inactive"]),
            )
            items = tuple(
                TariffItem(
                    lab,
                    float(kv[f"item.{lab}.p_delta"]),
                    float(kv[f"item.{lab}.eta"]),
                    prices[lab],
                )
                for lab in CLASS_LABELS
            )
        except KeyError as exc:
            raise DataError(f"contract record missing key {exc}") from exc
        return cls(items, classification, thetas, tuple(flags))


def build_contract(
    classification: Classification,
    catalog: Sequence[StorageType],
    users: Sequence[User],
    p_o_ref: float = DEFAULT_P_O_REF,
    price_differences: Optional[tuple[float, float, float]] = None,
) -> Contract:
    """Menu for ``users`` implementing ``classification``.

    ``price_differences`` overrides the midpoint choice and is not checked against
    the feasible region; use it to probe deliberately mis-priced menus.
    """
    check_users(users, catalog)
    intervals = price_difference_intervals(classification, catalog)
    if price_differences is None:
        price_differences = select_point(intervals)
    etas = (1.0, classification.partial_ratio or 0.0, 0.0)
    p_none = price_differences[2]

    flags = []
    if not intervals.has_full:
        flags.append("class F empty: F item priced below every storage cost")
    if not intervals.has_partial:
        flags.append("class P empty: P item carries eta 0")
    if not intervals.has_none:
        flags.append("class N empty")

    items = []
    for label, p_delta, eta in zip(CLASS_LABELS, price_differences, etas):
        levels = {}
        for u in users:
            pp, po = equalized_prices(u.d_peak, u.d_offpeak, p_delta, p_o_ref, p_none)
            if po < 0:
                raise ConfigError(
                    f"user {u.id}: off-peak price {po:.4g} under item {label} is negative; "
                    f"raise p_o_ref above {p_o_ref}"
                )
            levels[u.id] = (pp, po)
        items.append(TariffItem(label, float(p_delta), float(eta), levels))
    return Contract(tuple(items), classification, tuple(st.theta for st in catalog), tuple(flags))


@dataclass(frozen=True)
class ICEntry:
    user_id: str
    intended: str
    costs: dict = field(compare=False)
    margin: float
    expects_investment: bool
    invests_at_cap: bool
    passed: bool
    note: str = ""


@dataclass(frozen=True)
class ICReport:
    entries: tuple[ICEntry, ...]
    flags: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    @property
    def failures(self) -> list[ICEntry]:
        return [e for e in self.entries if not e.passed]

    @property
    def min_margin(self) -> float:
        strict = [e.margin for e in self.entries if e.expects_investment]
        return min(strict, default=math.inf)


def verify_ic(contract: Contract, users: Sequence[User]) -> ICReport:
    """Check each user's preference for its intended item and its investment level.

    Users expected to invest must strictly prefer their item and fill its cap.
    Users with nothing to gain from any item (class N, zero peak demand) are
    indifferent by construction; they pass if no other item is strictly better.
    """
    entries = []
    for u in users:
        intended = contract.intended(u)
        item = contract.item(intended)
        costs = {lab: user_cost_under_item(u, contract.item(lab)) for lab in CLASS_LABELS}
        margin = min(costs[lab] - costs[intended] for lab in CLASS_LABELS if lab != intended)
        tol = IC_RTOL * max(1.0, abs(costs[intended]))
        expects = item.eta > 0 and u.d_peak > 0
        decision = solve_ucm(u, item.p_delta, item.eta)
        at_cap = decision.capacity == item.eta * u.d_peak
        if expects:
            passed = margin > tol and at_cap
            note = "" if passed else ("prefers another item" if margin <= tol else "invests below cap")
        else:
            passed = margin >= -tol
            note = "indifferent" if abs(margin) <= tol else ""
            if not passed:
                note = "prefers another item"
        entries.append(ICEntry(u.id, intended, costs, margin, expects, at_cap, passed, note))
    return ICReport(tuple(entries), contract.flags)
