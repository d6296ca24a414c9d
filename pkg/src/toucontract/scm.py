"""Social cost minimization over per-type aggregate storage.

At the optimum capacity equals shift for every type, so the problem reduces to
choosing the shifts ``s^k``. The objective depends on the shifts only through
``sum(theta^k s^k)`` and the total shift ``S``, and the supply part is convex in
``S``. Any optimum therefore fills cheapest types first: walk the types in cost
order and shift each one until its peak demand is exhausted or the marginal
social cost

    theta^k + g_off'(D_off + S) - g_peak'(D_peak - S)

reaches zero. The type where it crosses zero inside its range is the single
partially investing type.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from toucontract.errors import ConfigError, InfeasibleError
from toucontract.model import (
    StorageType,
    SystemParams,
    supply_cost_offpeak,
    supply_cost_peak,
    validate_catalog,
)

SNAP_RTOL = 1e-7
ORACLE_BUDGET = 50_000_000


@dataclass(frozen=True)
class SocialOutcome:
    capacity: tuple[float, ...]
    shift: tuple[float, ...]
    cost_storage: float
    cost_peak: float
    cost_offpeak: float

    @property
    def total(self) -> float:
        return self.cost_storage + self.cost_peak + self.cost_offpeak

    @property
    def total_shift(self) -> float:
        return float(sum(self.shift))


@dataclass(frozen=True)
class Classification:
    """Partition of type indices into full / partial / no investment.

    ``inactive`` lists types with zero peak demand; they sit in ``none`` by
    convention and are ignored by the cost-ordering check.
    """

    n_types: int
    full: tuple[int, ...]
    partial: Optional[int]
    partial_ratio: Optional[float]
    none: tuple[int, ...]
    inactive: tuple[int, ...] = ()

    def __post_init__(self):
        members = list(self.full) + list(self.none)
        if self.partial is not None:
            members.append(self.partial)
            if self.partial_ratio is None or not 0.0 < self.partial_ratio < 1.0:
                raise ValueError(f"partial ratio {self.partial_ratio} outside (0, 1)")
        elif self.partial_ratio is not None:
            raise ValueError("partial ratio given without a partial type")
        if sorted(members) != list(range(self.n_types)):
            raise ValueError(f"classes do not partition {self.n_types} types: {members}")
        if not set(self.inactive) <= set(self.none):
            raise ValueError("inactive types must be classed as none")

    def label(self, k: int) -> str:
        if k in self.full:
            return "F"
        if k == self.partial:
            return "P"
        return "N"

    def eta(self, k: int) -> float:
        return {"F": 1.0, "P": self.partial_ratio, "N": 0.0}[self.label(k)]

    def is_ordered(self, thetas: Sequence[float]) -> bool:
        """Every active full type is cheaper than the partial type, which is cheaper than every active none type."""
        skip = set(self.inactive)
        f = [thetas[k] for k in self.full]
        n = [thetas[k] for k in self.none if k not in skip]
        p = [thetas[self.partial]] if self.partial is not None else []
        chain = [max(f)] if f else []
        chain += p
        if n:
            chain.append(min(n))
        return all(lo < hi for lo, hi in zip(chain, chain[1:]))


def outcome_from_shifts(thetas, d_peak, d_offpeak, params: SystemParams, shifts) -> SocialOutcome:
    shifts = [float(s) for s in shifts]
    total_shift = sum(shifts)
    peak_load = max(float(np.sum(d_peak)) - total_shift, 0.0)
    offpeak_load = float(np.sum(d_offpeak)) + total_shift
    return SocialOutcome(
        capacity=tuple(shifts),
        shift=tuple(shifts),
        cost_storage=float(sum(t * s for t, s in zip(thetas, shifts))),
        cost_peak=supply_cost_peak(peak_load, params),
        cost_offpeak=supply_cost_offpeak(offpeak_load, params),
    )


def marginal_slope(params: SystemParams) -> float:
    """d/dS of the supply-cost marginal; constant because costs are quadratic."""
    return 2.0 * params.alpha * (1.0 / params.hours_peak + 1.0 / params.hours_offpeak)


def threshold_shifts(thetas, d_peak, d_offpeak, params: SystemParams) -> list[float]:
    """Optimal per-type shifts by the cheapest-first walk. Inputs must be cost-sorted."""
    peak_tot = float(np.sum(d_peak))
    off_tot = float(np.sum(d_offpeak))
    slope = marginal_slope(params)
    # supply marginal at zero shift; beta cancels between periods
    h0 = params.marginal_offpeak(off_tot) - params.marginal_peak(peak_tot)
    shifts = [0.0] * len(thetas)
    S = 0.0
    for k, (theta, d) in enumerate(zip(thetas, d_peak)):
        if d <= 0:
            continue
        m_start = theta + h0 + slope * S
        if m_start >= 0:
            break
        if m_start + slope * d <= 0:
            shifts[k] = float(d)
            S += d
            continue
        shifts[k] = -m_start / slope
        break
    return shifts


def solve_scm(catalog: Sequence[StorageType], params: SystemParams):
    """Minimum social cost under known per-type aggregate demands.

    Returns ``(SocialOutcome, Classification)``.
    """
    validate_catalog(catalog)
    thetas = [st.theta for st in catalog]
    d_peak = [st.d_peak_agg for st in catalog]
    d_off = [st.d_offpeak_agg for st in catalog]
    shifts = threshold_shifts(thetas, d_peak, d_off, params)
    outcome = outcome_from_shifts(thetas, d_peak, d_off, params, shifts)
    return outcome, classify(outcome, catalog)


def optimality_residual(catalog: Sequence[StorageType], params: SystemParams, shifts) -> float:
    """Largest violation of the box-constrained stationarity conditions, relative to the cost scale."""
    thetas = np.array([st.theta for st in catalog])
    d_peak = np.array([st.d_peak_agg for st in catalog])
    d_off = np.array([st.d_offpeak_agg for st in catalog])
    s = np.asarray(shifts, dtype=float)
    S = s.sum()
    h = params.marginal_offpeak(d_off.sum() + S) - params.marginal_peak(d_peak.sum() - S)
    grad = thetas + h
    scale = max(1.0, float(np.max(np.abs(thetas))), abs(params.marginal_peak(d_peak.sum())))
    worst = 0.0
    for g, sk, dk in zip(grad, s, d_peak):
        if dk <= 0:
            continue
        if sk <= 0:
            viol = max(-g, 0.0)
        elif sk >= dk:
            viol = max(g, 0.0)
        else:
            viol = abs(g)
        worst = max(worst, viol / scale)
    return worst


def classify(outcome: SocialOutcome, catalog: Sequence[StorageType], rtol: float = SNAP_RTOL) -> Classification:
    full, none, inactive, partial = [], [], [], []
    for st, c in zip(catalog, outcome.capacity):
        d = st.d_peak_agg
        if d <= 0:
            none.append(st.k)
            inactive.append(st.k)
        elif c >= d * (1.0 - rtol):
            full.append(st.k)
        elif c <= d * rtol:
            none.append(st.k)
        else:
            partial.append((st.k, c / d))
    if len(partial) > 1:
        raise InfeasibleError(f"more than one partially investing type: {partial}")
    b, ratio = partial[0] if partial else (None, None)
    result = Classification(len(catalog), tuple(full), b, ratio, tuple(none), tuple(inactive))
    if not result.is_ordered([st.theta for st in catalog]):
        raise InfeasibleError(f"classification not ordered by storage cost: {result}")
    return result


def oracle_resolution_bound(catalog: Sequence[StorageType], params: SystemParams, grid_points: int) -> float:
    """How far the best grid point can sit above the true optimum.

    Half a grid step per coordinate times a Lipschitz bound of the objective on the box.
    """
    d_peak = np.array([st.d_peak_agg for st in catalog])
    d_off = np.array([st.d_offpeak_agg for st in catalog])
    h0 = params.marginal_offpeak(d_off.sum()) - params.marginal_peak(d_peak.sum())
    lip_supply = abs(h0) + marginal_slope(params) * d_peak.sum()
    steps = d_peak / (grid_points - 1)
    return float(sum(0.5 * step * (st.theta + lip_supply) for step, st in zip(steps, catalog)))


def scm_oracle(
    catalog: Sequence[StorageType],
    params: SystemParams,
    grid_points: int = 101,
    budget: int = ORACLE_BUDGET,
) -> SocialOutcome:
    """Exhaustive grid search over per-type shifts. Test-only validation path."""
    if not catalog:
        raise ConfigError("empty storage-type catalog")
    if grid_points < 2:
        raise ConfigError("grid_points must be at least 2")
    K = len(catalog)
    if K * grid_points**K > budget:
        raise ConfigError(f"oracle grid of {grid_points}^{K} points exceeds budget {budget}")
    thetas = [st.theta for st in catalog]
    d_peak = np.array([st.d_peak_agg for st in catalog])
    d_off = np.array([st.d_offpeak_agg for st in catalog])
    grids = [np.linspace(0.0, d, grid_points) for d in d_peak]

    shape = (grid_points,) * K
    S = np.zeros(shape)
    storage = np.zeros(shape)
    for k, g in enumerate(grids):
        view = [1] * K
        view[k] = grid_points
        g = g.reshape(view)
        S = S + g
        storage = storage + thetas[k] * g
    peak = np.maximum(d_peak.sum() - S, 0.0)
    total = storage + supply_cost_peak(peak, params) + supply_cost_offpeak(d_off.sum() + S, params)
    idx = np.unravel_index(int(np.argmin(total)), shape)
    shifts = [grids[k][i] for k, i in enumerate(idx)]
    return outcome_from_shifts(thetas, d_peak, d_off, params, shifts)
