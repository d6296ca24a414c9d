import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _instances import random_catalog, random_params
from toucontract import (
    ConfigError,
    InfeasibleError,
    SocialOutcome,
    SystemParams,
    classify,
    make_catalog,
    scm_oracle,
    solve_scm,
)
from toucontract.scm import oracle_resolution_bound, optimality_residual

# alpha/H is what enters the quadratic terms, so this equals alpha=1 with one-hour periods
TWO_TYPE_PARAMS = SystemParams(alpha=12.0, beta=0.0, gamma=0.0, hours_peak=12, hours_offpeak=12)


def two_type_catalog():
    return make_catalog([1.0, 10.0], [5.0, 5.0], [2.0, 2.0])


def test_two_type_example_by_hand():
    # stationarity 1 = 2(10 - S) - 2(4 + S)
    outcome, cls = solve_scm(two_type_catalog(), TWO_TYPE_PARAMS)
    assert outcome.capacity == pytest.approx((2.75, 0.0), abs=1e-12)
    assert outcome.shift == outcome.capacity
    assert outcome.total == pytest.approx(2.75 + 7.25**2 + 6.75**2, rel=1e-14)
    assert cls.full == ()
    assert cls.partial == 0
    assert cls.partial_ratio == pytest.approx(0.55)
    assert cls.none == (1,)


def test_two_type_example_matches_oracle():
    catalog = two_type_catalog()
    outcome, _ = solve_scm(catalog, TWO_TYPE_PARAMS)
    oracle = scm_oracle(catalog, TWO_TYPE_PARAMS, grid_points=1001)
    bound = oracle_resolution_bound(catalog, TWO_TYPE_PARAMS, 1001)
    assert outcome.total <= oracle.total + 1e-9
    assert oracle.total - outcome.total <= bound
    # 2.75 sits on the 0.005 grid, so the oracle lands on it exactly
    assert oracle.capacity[0] == pytest.approx(2.75)


def test_single_expensive_type_invests_nothing():
    params = SystemParams(1.0, 0.0, 0.0)
    catalog = make_catalog([100.0], [5.0], [5.0])
    outcome, cls = solve_scm(catalog, params)
    assert outcome.capacity == (0.0,)
    assert cls.none == (0,) and cls.partial is None


def test_shifting_everything_is_never_optimal():
    # with the whole peak shifted the supply marginal is 2*alpha*D_tot/H_off > 0 >= -theta
    params = SystemParams(1.0, 0.0, 0.0, 23, 1)
    catalog = make_catalog([0.0], [5.0], [0.0])
    outcome, cls = solve_scm(catalog, params)
    assert 0.0 < outcome.capacity[0] < 5.0
    assert cls.partial == 0
    oracle = scm_oracle(catalog, params, grid_points=2001)
    assert abs(outcome.total - oracle.total) <= oracle_resolution_bound(catalog, params, 2001)


def test_free_storage_beside_large_demand_fills_up():
    params = SystemParams(1.0, 0.0, 0.0)
    catalog = make_catalog([0.0, 500.0], [2.0, 50.0], [0.0, 0.0])
    outcome, cls = solve_scm(catalog, params)
    assert outcome.capacity == (2.0, 0.0)
    assert cls.full == (0,) and cls.none == (1,)
    oracle = scm_oracle(catalog, params, grid_points=1001)
    assert oracle.capacity[0] == 2.0


def test_cheap_types_with_tiny_demands_fill_up():
    params = SystemParams(1.0, 5.0, 0.0)
    catalog = make_catalog([0.1, 0.2, 0.3, 1000.0], [0.5, 0.5, 0.5, 50.0], [0.1, 0.1, 0.1, 0.1])
    outcome, cls = solve_scm(catalog, params)
    assert cls.full == (0, 1, 2) and cls.none == (3,)
    oracle = scm_oracle(catalog, params, grid_points=21)
    assert oracle.capacity == pytest.approx(outcome.capacity)


def test_zero_demands():
    params = SystemParams(1.0, 2.0, 3.0)
    catalog = make_catalog([1.0, 2.0], [0.0, 0.0], [0.0, 0.0])
    outcome, cls = solve_scm(catalog, params)
    assert outcome.total == pytest.approx(3.0 * 24)
    assert cls.none == (0, 1) and cls.inactive == (0, 1)
    assert scm_oracle(catalog, params).total == pytest.approx(72.0)


def test_zero_demand_type_between_investing_types():
    params = SystemParams(1.0, 0.0, 0.0)
    catalog = make_catalog([0.1, 0.2, 0.3, 1000.0], [0.5, 0.0, 0.5, 50.0], [0.1, 0.1, 0.1, 0.1])
    _, cls = solve_scm(catalog, params)
    assert cls.full == (0, 2)
    assert cls.inactive == (1,)
    assert cls.none == (1, 3)


def test_errors():
    with pytest.raises(ConfigError):
        solve_scm([], SystemParams(1.0))
    with pytest.raises(ConfigError):
        make_catalog([2.0, 1.0], [1.0, 1.0], [1.0, 1.0])
    with pytest.raises(ConfigError):
        scm_oracle(make_catalog([1, 2, 3, 4], [1] * 4, [1] * 4), SystemParams(1.0), grid_points=1000)


def test_classify_rejects_two_partial_types():
    catalog = two_type_catalog()
    outcome = SocialOutcome((1.0, 1.0), (1.0, 1.0), 0.0, 0.0, 0.0)
    with pytest.raises(InfeasibleError):
        classify(outcome, catalog)


def test_classify_rejects_misordered_partition():
    catalog = two_type_catalog()
    outcome = SocialOutcome((0.0, 5.0), (0.0, 5.0), 0.0, 0.0, 0.0)
    with pytest.raises(InfeasibleError):
        classify(outcome, catalog)


def test_classify_snaps_near_boundaries():
    catalog = two_type_catalog()
    outcome = SocialOutcome((5.0 * (1 - 1e-9), 5.0 * 1e-9), (0, 0), 0.0, 0.0, 0.0)
    cls = classify(outcome, catalog)
    assert cls.full == (0,) and cls.none == (1,)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), K=st.integers(1, 3))
def test_oracle_never_beats_solver(seed, K):
    rng = np.random.default_rng(seed)
    params = random_params(rng)
    catalog = random_catalog(rng, K)
    outcome, _ = solve_scm(catalog, params)
    grid = 401 if K < 3 else 61
    oracle = scm_oracle(catalog, params, grid_points=grid)
    assert oracle.total >= outcome.total - 1e-9 * max(1.0, outcome.total)
    assert oracle.total - outcome.total <= oracle_resolution_bound(catalog, params, grid) + 1e-9


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), K=st.integers(1, 8))
def test_stationarity_certificate(seed, K):
    rng = np.random.default_rng(seed)
    params = random_params(rng)
    catalog = random_catalog(rng, K, d_max=rng.uniform(0.1, 50.0))
    outcome, cls = solve_scm(catalog, params)
    assert optimality_residual(catalog, params, outcome.shift) <= 1e-9
    for st_, s in zip(catalog, outcome.shift):
        assert 0.0 <= s <= st_.d_peak_agg
    assert cls.is_ordered([c.theta for c in catalog])
