"""Contract-based time-of-use pricing for user-side energy storage investment."""

from toucontract.errors import ConfigError, DataError, InfeasibleError
from toucontract.model import (
    DemandPanel,
    StorageType,
    SystemParams,
    TariffItem,
    User,
    UserDecision,
    equalized_prices,
    make_catalog,
    no_storage_cost,
    solve_ucm,
    supply_cost_offpeak,
    supply_cost_peak,
    user_cost_under_item,
)
from toucontract.scm import Classification, SocialOutcome, classify, scm_oracle, solve_scm
from toucontract.planner import (
    PlanResult,
    ScenarioSet,
    kappa,
    plan,
    solve_escm,
    solve_escm_c,
)
from toucontract.contract import (
    Contract,
    PriceDifferenceIntervals,
    build_contract,
    select_point,
    price_difference_intervals,
    verify_ic,
)
from toucontract.market import kappa_no, simulate, simulate_expected

__version__ = "0.1.0"

__all__ = [
    "Classification",
    "ConfigError",
    "Contract",
    "DataError",
    "DemandPanel",
    "InfeasibleError",
    "PlanResult",
    "PriceDifferenceIntervals",
    "ScenarioSet",
    "SocialOutcome",
    "StorageType",
    "SystemParams",
    "TariffItem",
    "User",
    "UserDecision",
    "build_contract",
    "classify",
    "equalized_prices",
    "kappa",
    "kappa_no",
    "make_catalog",
    "no_storage_cost",
    "plan",
    "price_difference_intervals",
    "scm_oracle",
    "select_point",
    "simulate",
    "simulate_expected",
    "solve_escm",
    "solve_escm_c",
    "solve_scm",
    "solve_ucm",
    "supply_cost_offpeak",
    "supply_cost_peak",
    "user_cost_under_item",
    "verify_ic",
]
