import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cacherec.lp import check_feasibility
from cacherec.model import (RecommendationPolicy, Scenario, baseline_policy, compute_q_max,
                            quality_slack)
from cacherec.optimal import (FlowSolution, SolverError, build_flow_lp, flows_from_policy,
                              recover_policy, solve_cars, solve_optimal, var_index)
from cacherec.session import session_cost
from tests.oracles import random_scenario, random_slates


def test_problem_dimensions():
    rng = np.random.default_rng(0)
    s = random_scenario(rng, 3, 2)
    p = build_flow_lp(s, compute_q_max(s.U, s.v))
    assert p.n_vars == 3 + 2 * 9
    assert p.n_eq == 2 * 3 + 3
    assert p.n_ub == 3 + 9
    for n in range(2):
        for i in range(3):
            assert p.hi[var_index(3, n, i, i)] == 0.0


def test_policy_flows_satisfy_the_lp():
    rng = np.random.default_rng(1)
    s = random_scenario(rng, 6, 2, q=0.0)
    qb = compute_q_max(s.U, s.v)
    pol = qb.policy
    fs = flows_from_policy(s, pol)
    x = np.concatenate([fs.z, fs.F.ravel()])
    p = build_flow_lp(s.replace(q=1.0), qb)
    assert check_feasibility(p, x) < 1e-10
    assert abs(fs.z.sum() - 1 / (1 - s.alpha)) < 1e-9
    assert p.c @ x * (1 - s.alpha) == pytest.approx(session_cost(s, pol), abs=1e-12)


def test_recover_uniform_flows():
    K, N = 5, 2
    z = np.linspace(1, 2, K)
    F = np.repeat((z[:, None] / (K - 1) * (1 - np.eye(K)))[None], N, axis=0)
    pol = recover_policy(FlowSolution(z, F))
    assert np.allclose(pol.R, (1 - np.eye(K)) / (K - 1), atol=1e-15)


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1))
def test_flow_roundtrip(seed):
    rng = np.random.default_rng(seed)
    K = int(rng.integers(3, 10))
    N = int(rng.integers(1, min(3, K - 1) + 1))
    s = random_scenario(rng, K, N)
    R = np.einsum("m,mnij->nij", rng.dirichlet(np.ones(4)), random_slates(rng, K, N, 4))
    back = recover_policy(flows_from_policy(s, RecommendationPolicy(R)))
    assert np.abs(back.R - R).max() < 1e-8


def test_recover_rejects_bad_flows():
    F = np.zeros((1, 2, 2))
    F[0, 0, 1] = F[0, 1, 0] = 1.0
    with pytest.raises(SolverError):
        recover_policy(FlowSolution(np.array([1.0, 0.0]), F))
    F[0, 0, 1] = -1e-3
    with pytest.raises(SolverError):
        recover_policy(FlowSolution(np.array([1.0, 1.0]), F))


def test_two_contents_forced_policy():
    s = Scenario(p0=[0.3, 0.7], U=[[0, 1], [1, 0]], c=[0, 1], v=[1.0], alpha=0.6, q=0.5)
    res = solve_optimal(s)
    assert np.allclose(res.policy.R[0], [[0, 1], [1, 0]])
    back = recover_policy(flows_from_policy(s, res.policy))
    assert np.allclose(back.R, res.policy.R)


def test_all_cached_and_equal_costs():
    rng = np.random.default_rng(2)
    s = random_scenario(rng, 7, 2)
    assert solve_optimal(s.replace(c=np.zeros(7))).cost == pytest.approx(0.0, abs=1e-12)
    res = solve_optimal(s.replace(c=np.full(7, 3.0)))
    assert res.objective == pytest.approx(3.0 / (1 - s.alpha), rel=1e-9)
    assert res.cost == pytest.approx(3.0, rel=1e-9)


def test_single_cached_item_beats_no_recommendation():
    rng = np.random.default_rng(3)
    c = np.ones(8)
    c[0] = 0.0
    s = random_scenario(rng, 8, 2, q=0.0, alpha=0.9, c=c)
    res = solve_optimal(s)
    assert res.cost < s.p0 @ s.c - 1e-3
    assert res.cost <= session_cost(s, baseline_policy(s.U, s.v)) + 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_solution_properties(seed):
    rng = np.random.default_rng(seed)
    K = int(rng.integers(3, 11))
    N = int(rng.integers(1, min(3, K - 1) + 1))
    s = random_scenario(rng, K, N, c=rng.integers(0, 3, K).astype(float))
    res = solve_optimal(s)
    assert res.policy.violations() == []
    assert quality_slack(res.policy, s).min() >= -1e-7
    assert res.cost == pytest.approx(res.info["lp_cost"], abs=1e-6)
    assert res.cost <= session_cost(s, baseline_policy(s.U, s.v)) + 1e-7
    fs = flows_from_policy(s, res.policy)
    assert abs(fs.z.sum() - 1 / (1 - s.alpha)) < 1e-6
    assert fs.z.min() > 0


def test_cost_non_decreasing_in_q():
    rng = np.random.default_rng(4)
    for _ in range(3):
        s = random_scenario(rng, 9, 2)
        costs = [solve_optimal(s.replace(q=q)).cost for q in (0, .25, .5, .75, .9, 1)]
        assert all(b >= a - 1e-9 for a, b in zip(costs, costs[1:]))


def test_backends_agree():
    rng = np.random.default_rng(5)
    for _ in range(3):
        s = random_scenario(rng, 6, 2)
        a = solve_optimal(s, method="highs")
        b = solve_optimal(s, method="simplex")
        assert a.cost == pytest.approx(b.cost, abs=1e-8)


def test_single_slot_cars_equals_optimal():
    rng = np.random.default_rng(6)
    s = random_scenario(rng, 10, 1)
    assert solve_cars(s).cost == pytest.approx(solve_optimal(s).cost, abs=1e-9)


def test_cars_ignores_clicks_and_is_dominated():
    rng = np.random.default_rng(7)
    s = random_scenario(rng, 10, 3, v=np.array([0.6, 0.3, 0.1]))
    cars = solve_cars(s)
    opt = solve_optimal(s)
    assert opt.cost <= cars.cost + 1e-9
    for _ in range(4):
        v = rng.dirichlet(np.ones(3))
        assert session_cost(s.replace(v=v), cars.policy) == pytest.approx(cars.cost, abs=1e-12)
    uni = np.full(3, 1 / 3)
    assert quality_slack(cars.policy, s, compute_q_max(s.U, uni), v=uni).min() >= -1e-7


def test_unweighted_quality_variant():
    rng = np.random.default_rng(8)
    s = random_scenario(rng, 8, 2, v=np.array([0.8, 0.2]))
    res = solve_optimal(s, weighted_quality=False)
    assert res.policy.violations() == []
    ones = np.ones(2)
    achieved = (res.policy.R.sum(axis=0) * s.U).sum(axis=1)
    target = s.q * compute_q_max(s.U, ones, 2).q_max
    assert np.all(achieved >= target - 1e-7)
