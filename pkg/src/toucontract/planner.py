"""Expected social cost under demand uncertainty.

Two quantities over a finite, weighted set of demand scenarios:

* ``solve_escm``: the first-best benchmark, re-optimizing storage in every scenario.
* ``solve_escm_c``: the best three-class plan fixed before demand is realized. Types
  cheaper than a boundary type ``b`` shift all their peak demand, costlier types
  shift nothing, and type ``b`` shifts a fraction ``eta_b`` of it in every scenario.
  For a given ``b`` the expected cost is a convex quadratic in ``eta_b``.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from toucontract.errors import ConfigError, DataError
from toucontract.model import StorageType, SystemParams, supply_cost_offpeak, supply_cost_peak, validate_catalog
from toucontract.scm import SNAP_RTOL, Classification, marginal_slope, outcome_from_shifts, threshold_shifts

SCENARIO_HEADER = "# toucontract-scenarioset v1"
WEIGHT_ATOL = 1e-12


@dataclass(frozen=True)
class ScenarioSet:
    """Weighted joint realizations of every type's (peak, off-peak) demand.

    ``peak`` and ``offpeak`` have shape ``(n_scenarios, n_types)``.
    """

    weights: np.ndarray
    peak: np.ndarray
    offpeak: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        p = np.atleast_2d(np.asarray(self.peak, dtype=float))
        o = np.atleast_2d(np.asarray(self.offpeak, dtype=float))
        if w.ndim != 1 or len(w) == 0:
            raise DataError("need a non-empty 1-D weight vector")
        if p.shape != o.shape or p.shape[0] != len(w):
            raise DataError(f"shape mismatch: weights {w.shape}, peak {p.shape}, offpeak {o.shape}")
        if np.any(w < 0) or abs(w.sum() - 1.0) > WEIGHT_ATOL:
            raise DataError(f"weights must be non-negative and sum to 1 (sum={w.sum()!r})")
        if np.any(p < 0) or np.any(o < 0) or not (np.all(np.isfinite(p)) and np.all(np.isfinite(o))):
            raise DataError("scenario demands must be finite and non-negative")
        for name, arr in (("weights", w), ("peak", p), ("offpeak", o)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_scenarios(self) -> int:
        return len(self.weights)

    @property
    def n_types(self) -> int:
        return self.peak.shape[1]

    @classmethod
    def single(cls, catalog: Sequence[StorageType]) -> "ScenarioSet":
        return cls(
            np.array([1.0]),
            np.array([[st.d_peak_agg for st in catalog]]),
            np.array([[st.d_offpeak_agg for st in catalog]]),
        )

    @classmethod
    def uniform(cls, peak, offpeak) -> "ScenarioSet":
        peak = np.atleast_2d(np.asarray(peak, dtype=float))
        n = peak.shape[0]
        return cls(np.full(n, 1.0 / n), peak, offpeak)

    @classmethod
    def from_panel(cls, panel, type_of, n_types: int) -> "ScenarioSet":
        """Aggregate a per-user demand panel into per-type scenarios via a user->type map."""
        type_of = np.asarray(type_of)
        if len(type_of) != panel.n_users:
            raise DataError("grouping length differs from panel user count")
        onehot = np.zeros((panel.n_users, n_types))
        onehot[np.arange(panel.n_users), type_of] = 1.0
        return cls(panel.weights, panel.peak @ onehot, panel.offpeak @ onehot)

    def catalog(self, i: int, thetas: Sequence[float]) -> list[StorageType]:
        return [
            StorageType(k, float(t), float(self.peak[i, k]), float(self.offpeak[i, k]))
            for k, t in enumerate(thetas)
        ]

    def expected_catalog(self, thetas: Sequence[float]) -> list[StorageType]:
        mp = self.weights @ self.peak
        mo = self.weights @ self.offpeak
        return [StorageType(k, float(t), float(mp[k]), float(mo[k])) for k, t in enumerate(thetas)]

    def dumps(self) -> str:
        buf = io.StringIO()
        buf.write(f"{SCENARIO_HEADER}\n")
        buf.write(f"n_scenarios={self.n_scenarios} n_types={self.n_types}\n")
        for w, p, o in zip(self.weights, self.peak, self.offpeak):
            fields = [repr(float(w))]
            for pk, ok in zip(p, o):
                fields += [repr(float(pk)), repr(float(ok))]
            buf.write("\t".join(fields) + "\n")
        return buf.getvalue()

    @classmethod
    def loads(cls, text: str) -> "ScenarioSet":
        lines = text.splitlines()
        if not lines or lines[0].strip() != SCENARIO_HEADER:
            raise DataError("missing scenario-set version header")
        try:
            dims = dict(item.split("=") for item in lines[1].split())
            n, K = int(dims["n_scenarios"]), int(dims["n_types"])
            rows = [[float(x) for x in line.split("\t")] for line in lines[2:] if line.strip()]
        except (IndexError, KeyError, ValueError) as exc:
            raise DataError(f"malformed scenario set: {exc}") from exc
        arr = np.array(rows)
        if arr.shape != (n, 1 + 2 * K):
            raise DataError(f"scenario table has shape {arr.shape}, expected {(n, 1 + 2 * K)}")
        return cls(arr[:, 0], arr[:, 1::2], arr[:, 2::2])


@dataclass(frozen=True)
class PlanResult:
    sym_b: float
    sym_c: float
    boundary_type: int
    eta_b: float
    candidate_costs: tuple[float, ...] = ()

    @property
    def kappa(self) -> float:
        return kappa(self.sym_c, self.sym_b)


def _thetas(catalog: Sequence[StorageType], scenarios: ScenarioSet) -> list[float]:
    validate_catalog(catalog)
    if len(catalog) != scenarios.n_types:
        raise ConfigError(f"catalog has {len(catalog)} types, scenarios have {scenarios.n_types}")
    return [st.theta for st in catalog]


def scenario_optima(scenarios: ScenarioSet, catalog: Sequence[StorageType], params: SystemParams) -> np.ndarray:
    """First-best social cost of every scenario."""
    thetas = _thetas(catalog, scenarios)
    out = np.empty(scenarios.n_scenarios)
    for i in range(scenarios.n_scenarios):
        p, o = scenarios.peak[i], scenarios.offpeak[i]
        shifts = threshold_shifts(thetas, p, o, params)
        out[i] = outcome_from_shifts(thetas, p, o, params, shifts).total
    return out


def solve_escm(scenarios: ScenarioSet, catalog: Sequence[StorageType], params: SystemParams) -> float:
    return float(scenarios.weights @ scenario_optima(scenarios, catalog, params))


def _boundary_quadratic(scenarios: ScenarioSet, thetas, b: int, params: SystemParams):
    """Shifted loads and the (quadratic, linear) coefficients of expected cost in eta_b."""
    P, O, w = scenarios.peak, scenarios.offpeak, scenarios.weights
    base_shift = P[:, :b].sum(axis=1)
    peak_rest = P.sum(axis=1) - base_shift
    off_rest = O.sum(axis=1) + base_shift
    d = P[:, b]
    quad = 0.5 * marginal_slope(params) * float(w @ d**2)
    # beta terms cancel between the two periods
    lin = float(
        w
        @ (
            d
            * (
                thetas[b]
                - 2.0 * params.alpha * peak_rest / params.hours_peak
                + 2.0 * params.alpha * off_rest / params.hours_offpeak
            )
        )
    )
    fixed_storage = P[:, :b] @ np.asarray(thetas[:b], dtype=float)
    return fixed_storage, peak_rest, off_rest, d, quad, lin


def boundary_eta(quad: float, lin: float) -> float:
    """Minimizer of ``quad*eta^2 + lin*eta`` over [0, 1]."""
    if quad <= 0:
        return 0.0 if lin >= 0 else 1.0
    return float(np.clip(-lin / (2.0 * quad), 0.0, 1.0))


def contract_plan_cost(scenarios: ScenarioSet, thetas, b: int, eta_b: float, params: SystemParams) -> float:
    """Expected social cost when types below ``b`` shift fully and ``b`` shifts ``eta_b`` of its peak."""
    fixed_storage, peak_rest, off_rest, d, _, _ = _boundary_quadratic(scenarios, thetas, b, params)
    shift = eta_b * d
    per_scenario = (
        fixed_storage
        + thetas[b] * shift
        + supply_cost_peak(np.maximum(peak_rest - shift, 0.0), params)
        + supply_cost_offpeak(off_rest + shift, params)
    )
    return float(scenarios.weights @ per_scenario)


def solve_escm_c(scenarios: ScenarioSet, catalog: Sequence[StorageType], params: SystemParams):
    """Best boundary type and ratio for a plan fixed across scenarios.

    Returns ``(sym_c, b, eta_b, candidate_costs)``. Ties go to the smaller ``b``.
    """
    thetas = _thetas(catalog, scenarios)
    best = None
    costs = []
    for b in range(len(thetas)):
        *_, quad, lin = _boundary_quadratic(scenarios, thetas, b, params)
        eta = boundary_eta(quad, lin)
        cost = contract_plan_cost(scenarios, thetas, b, eta, params)
        costs.append(cost)
        if best is None or cost < best[0] - 1e-12 * abs(best[0]):
            best = (cost, b, eta)
    return best[0], best[1], best[2], tuple(costs)


def kappa(sym_c: float, sym_b: float) -> float:
    if not sym_b > 0:
        raise ValueError(f"benchmark cost must be positive, got {sym_b}")
    return sym_c / sym_b


def plan(scenarios: ScenarioSet, catalog: Sequence[StorageType], params: SystemParams) -> PlanResult:
    sym_b = solve_escm(scenarios, catalog, params)
    sym_c, b, eta, costs = solve_escm_c(scenarios, catalog, params)
    return PlanResult(sym_b, sym_c, b, eta, costs)


def plan_classification(
    n_types: int, boundary_type: int, eta_b: float, rtol: float = SNAP_RTOL
) -> Classification:
    """Three-class partition implied by a boundary type and its ratio."""
    full = list(range(boundary_type))
    none = list(range(boundary_type + 1, n_types))
    partial: Optional[int] = None
    ratio: Optional[float] = None
    if eta_b >= 1.0 - rtol:
        full.append(boundary_type)
    elif eta_b <= rtol:
        none.insert(0, boundary_type)
    else:
        partial, ratio = boundary_type, float(eta_b)
    return Classification(n_types, tuple(full), partial, ratio, tuple(none))
