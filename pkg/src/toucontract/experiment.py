"""End-to-end runs behind the CLI.

``run_complete_info`` designs a contract for one known demand profile and checks
that decentralized behaviour reproduces the planner's optimum.
``run_incomplete_info`` sweeps mean storage cost and solar level over random
type groupings and reports the contract's gap to the first-best benchmark
(kappa) and its gain over no storage (kappa_no).
"""

from __future__ import annotations

import copy
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Mapping, Optional

import numpy as np

from toucontract.contract import DEFAULT_P_O_REF, build_contract, price_difference_intervals, verify_ic
from toucontract.data import (
    DEFAULT_PEAK_HOURS,
    build_panel,
    build_theta_catalog,
    ingest_csv,
    sample_type_groupings,
    synthetic_hourly,
    validate_peak_hours,
)
from toucontract.errors import ConfigError
from toucontract.market import simulate, simulate_expected
from toucontract.model import HOURS_PER_DAY, DemandPanel, SystemParams, User, make_catalog
from toucontract.planner import ScenarioSet, plan, plan_classification
from toucontract.report import config_hash, file_hash, write_summary, write_table
from toucontract.scm import solve_scm

log = logging.getLogger(__name__)

WORKERS_ENV = "TOUCONTRACT_WORKERS"

DEFAULT_CONFIG: dict[str, Any] = {
    "system": {"alpha": 1.0, "beta": 20.0, "gamma": 100.0},
    "window": {"peak_hours": list(DEFAULT_PEAK_HOURS)},
    "data": {"solar_scale": 1.0, "curtail": True, "demand_scale": 1000.0},
    "synthetic": {"n_users": 40, "n_days": 60, "seed": 1},
    "contract": {"p_o_ref": 200.0},
    "complete": {"theta_bar": 30.0, "lambda_s": 1.0 / 3.0},
    "study": {
        "n_types": 4,
        "lambda_s": 1.0 / 3.0,
        "theta_bar": [2.0, 10.0, 30.0, 60.0, 100.0, 130.0],
        "solar_scales": [0.0, 1.0, 2.0],
        "n_groupings": 100,
    },
    "seed": 0,
}

SWEEP_COLUMNS = (
    "solar_scale",
    "theta_bar",
    "n_groupings",
    "kappa_mean",
    "kappa_std",
    "kappa_min",
    "kappa_max",
    "kappa_no_mean",
    "kappa_no_std",
    "sym_b_mean",
    "sym_c_mean",
    "contract_cost_mean",
    "sim_gap_max",
)


def _merge(base: dict, override: Mapping) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: Optional[str] = None, overrides: Optional[Mapping] = None) -> dict:
    """Defaults, then the JSON file at ``path``, then ``overrides``."""
    config = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path}: {exc}") from None
        if not isinstance(user, dict):
            raise ConfigError("config must be a JSON object")
        config = _merge(config, user)
    if overrides:
        config = _merge(config, overrides)
    return config


def system_params(config: Mapping) -> SystemParams:
    hours = validate_peak_hours(config["window"]["peak_hours"])
    sysc = config["system"]
    try:
        return SystemParams(
            float(sysc["alpha"]),
            float(sysc.get("beta", 0.0)),
            float(sysc.get("gamma", 0.0)),
            len(hours),
            HOURS_PER_DAY - len(hours),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad system section: {exc}") from None


def _hourly(config: Mapping, data_path: Optional[str]):
    if data_path is not None:
        return ingest_csv(data_path)
    syn = config["synthetic"]
    return synthetic_hourly(int(syn["n_users"]), int(syn["n_days"]), int(syn["seed"]))


def _panel(config: Mapping, hourly, solar_scale: float) -> DemandPanel:
    d = config["data"]
    return build_panel(
        hourly,
        peak_hours=config["window"]["peak_hours"],
        solar_scale=float(solar_scale),
        curtail=bool(d.get("curtail", True)),
        demand_scale=float(d.get("demand_scale", 1.0)),
    )


def _provenance(config: Mapping, data_path: Optional[str], seed: int, mode: str) -> dict:
    return {
        "mode": mode,
        "seed": int(seed),
        "config_hash": config_hash(config),
        "config": config,
        "data": None if data_path is None else {"file": Path(data_path).name, "sha256": file_hash(data_path)},
    }


def _complete_instance(config: Mapping, data_path: Optional[str], seed: int):
    """Catalog and users for a single known demand profile."""
    inst = config.get("instance")
    if inst is not None:
        try:
            catalog = make_catalog(inst["theta"], inst["d_peak"], inst["d_offpeak"])
        except KeyError as exc:
            raise ConfigError(f"instance section missing {exc}") from None
        if "users" in inst:
            users = [
                User(str(u["id"]), catalog[int(u["type"])].theta, float(u["d_peak"]), float(u["d_offpeak"]), int(u["type"]))
                for u in inst["users"]
            ]
        else:
            users = [User(f"type{st.k}", st.theta, st.d_peak_agg, st.d_offpeak_agg, st.k) for st in catalog]
        return catalog, users
    comp = config["complete"]
    thetas = comp.get("theta") or build_theta_catalog(float(comp["theta_bar"]), float(comp["lambda_s"]))
    hourly = _hourly(config, data_path)
    panel = _panel(config, hourly, config["data"].get("solar_scale", 1.0))
    type_of = sample_type_groupings(panel.n_users, len(thetas), 1, seed)[0]
    users = panel.representative_users(type_of, thetas)
    peak = np.zeros(len(thetas))
    off = np.zeros(len(thetas))
    for u in users:
        peak[u.type_k] += u.d_peak
        off[u.type_k] += u.d_offpeak
    return make_catalog(thetas, peak, off), users


def run_complete_info(config: Mapping, out_dir, data_path: Optional[str] = None, seed: Optional[int] = None) -> dict:
    seed = int(config.get("seed", 0) if seed is None else seed)
    params = system_params(config)
    catalog, users = _complete_instance(config, data_path, seed)
    outcome, classification = solve_scm(catalog, params)
    p_o_ref = float(config["contract"].get("p_o_ref", DEFAULT_P_O_REF))
    contract = build_contract(classification, catalog, users, p_o_ref)
    ic = verify_ic(contract, users)
    sim = simulate(
        contract,
        users,
        params,
        scenario=([st.d_peak_agg for st in catalog], [st.d_offpeak_agg for st in catalog]),
    )
    realized = sim.outcome.total
    ratio = realized / outcome.total if outcome.total > 0 else float("nan")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "contract.txt").write_text(contract.dumps())
    write_table(
        out / "types.tsv",
        ("type", "theta", "d_peak", "d_offpeak", "class", "optimal_capacity", "realized_capacity"),
        [
            {
                "type": st.k,
                "theta": st.theta,
                "d_peak": st.d_peak_agg,
                "d_offpeak": st.d_offpeak_agg,
                "class": classification.label(st.k),
                "optimal_capacity": outcome.capacity[st.k],
                "realized_capacity": sim.outcome.capacity[st.k],
            }
            for st in catalog
        ],
    )
    write_table(
        out / "ic_report.tsv",
        ("user", "intended", "chosen", "cost_F", "cost_P", "cost_N", "margin", "passed", "note"),
        [
            {
                "user": e.user_id,
                "intended": e.intended,
                "chosen": sim.choices[e.user_id],
                "cost_F": e.costs["F"],
                "cost_P": e.costs["P"],
                "cost_N": e.costs["N"],
                "margin": e.margin,
                "passed": e.passed,
                "note": e.note or "-",
            }
            for e in ic.entries
        ],
    )
    intervals = price_difference_intervals(classification, catalog)
    summary = {
        **_provenance(config, data_path, seed, "complete"),
        "optimal_cost": outcome.total,
        "optimal_cost_parts": {
            "storage": outcome.cost_storage,
            "peak": outcome.cost_peak,
            "offpeak": outcome.cost_offpeak,
        },
        "realized_cost": realized,
        "realized_over_optimal": ratio,
        "no_storage_cost": sim.no_storage_cost,
        "classification": {
            "F": list(classification.full),
            "P": classification.partial,
            "P_ratio": classification.partial_ratio,
            "N": list(classification.none),
        },
        "price_differences": dict(zip("FPN", contract.price_differences)),
        "region_margin": intervals.margin(contract.price_differences[0], contract.price_differences[1]),
        "ic_passed": ic.passed,
        "ic_min_margin": ic.min_margin if np.isfinite(ic.min_margin) else None,
        "flags": list(contract.flags),
        "peak_load": sim.peak_load,
        "offpeak_load": sim.offpeak_load,
    }
    write_summary(out / "summary.json", summary)
    return summary


def evaluate_point(panel: DemandPanel, groupings, thetas, params: SystemParams, p_o_ref: float) -> dict:
    """Contract performance for one (solar level, mean cost) point across groupings."""
    K = len(thetas)
    kap, kno, symb, symc, cost, gap = [], [], [], [], [], []
    for type_of in groupings:
        scenarios = ScenarioSet.from_panel(panel, type_of, K)
        catalog = scenarios.expected_catalog(thetas)
        result = plan(scenarios, catalog, params)
        classification = plan_classification(K, result.boundary_type, result.eta_b)
        users = panel.representative_users(type_of, thetas)
        contract = build_contract(classification, catalog, users, p_o_ref)
        sim = simulate_expected(contract, users, params, panel)
        kap.append(result.kappa)
        kno.append(sim.kappa_no)
        symb.append(result.sym_b)
        symc.append(result.sym_c)
        cost.append(sim.expected_cost)
        gap.append(abs(sim.expected_cost - result.sym_c) / result.sym_c)
    return {
        "n_groupings": len(groupings),
        "kappa_mean": float(np.mean(kap)),
        "kappa_std": float(np.std(kap)),
        "kappa_min": float(np.min(kap)),
        "kappa_max": float(np.max(kap)),
        "kappa_no_mean": float(np.mean(kno)),
        "kappa_no_std": float(np.std(kno)),
        "sym_b_mean": float(np.mean(symb)),
        "sym_c_mean": float(np.mean(symc)),
        "contract_cost_mean": float(np.mean(cost)),
        "sim_gap_max": float(np.max(gap)),
    }


def resolve_workers(workers: Optional[int]) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    if workers < 1:
        raise ConfigError("worker count must be at least 1")
    return workers


def run_incomplete_info(
    config: Mapping,
    out_dir,
    data_path: Optional[str] = None,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
) -> list[dict]:
    seed = int(config.get("seed", 0) if seed is None else seed)
    workers = resolve_workers(workers)
    params = system_params(config)
    study = config["study"]
    K = int(study["n_types"])
    lam = float(study["lambda_s"])
    theta_bars = [float(t) for t in study["theta_bar"]]
    solar_scales = [float(s) for s in study["solar_scales"]]
    n_groupings = int(study["n_groupings"])
    if K != 4:
        raise ConfigError("the storage-cost catalog is defined for exactly 4 types")
    if not theta_bars or not solar_scales or n_groupings < 1:
        raise ConfigError("study needs theta_bar values, solar scales and at least one grouping")
    p_o_ref = float(config["contract"].get("p_o_ref", DEFAULT_P_O_REF))
    catalogs = {tb: build_theta_catalog(tb, lam) for tb in theta_bars}

    hourly = _hourly(config, data_path)
    groupings = sample_type_groupings(len(hourly.user_ids), K, n_groupings, seed)
    out = Path(out_dir)
    (out / "scenarios").mkdir(parents=True, exist_ok=True)

    tasks = []
    for s in solar_scales:
        panel = _panel(config, hourly, s)
        (out / "scenarios" / f"solar_{s!r}.txt").write_text(ScenarioSet.from_panel(panel, groupings[0], K).dumps())
        for tb in theta_bars:
            tasks.append(((s, tb), (panel, groupings, catalogs[tb], params, p_o_ref)))

    if workers == 1:
        results = [evaluate_point(*args) for _, args in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(evaluate_point, *args) for _, args in tasks]
            results = [f.result() for f in futures]

    rows = [{"solar_scale": s, "theta_bar": tb, **res} for ((s, tb), _), res in zip(tasks, results)]
    write_table(out / "sweep.tsv", SWEEP_COLUMNS, rows)
    summary = {
        **_provenance(config, data_path, seed, "incomplete"),
        "n_users": len(hourly.user_ids),
        "n_days": len(hourly.days),
        "dropped_days": len(hourly.dropped_days),
        "kappa_mean_max": max(r["kappa_mean"] for r in rows),
        "kappa_std_max": max(r["kappa_std"] for r in rows),
        "kappa_mean_min": min(r["kappa_mean"] for r in rows),
        "sim_gap_max": max(r["sim_gap_max"] for r in rows),
    }
    write_summary(out / "summary.json", summary)
    return rows
