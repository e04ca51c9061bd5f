import json
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings

from conftest import task
from oracles import brute_force_optimum, chain_gain
from safesched.fixtures import load_fixture
from safesched.mdp import IDLE, build_explicit
from safesched.mean_cost import (
    EmptyPrefix,
    NonTotalStrategy,
    discounted_sum,
    evaluate_strategy,
    mean_cost_prefix,
    optimize_discounted,
    optimize_mean_cost,
    stationary_distribution,
    strategy_from_json,
    strategy_to_json,
)
from safesched.safety import Unschedulable, safe_region
from safesched.task_model import TaskSystem
from test_mdp import small_systems


def never_soft(m):
    sys = m.sys
    out = {}
    for v in m.scheduler_ids():
        acts = m.sem.actions(v)
        hard = [a for a in acts if a in sys.hard]
        out[v] = hard[0] if hard else IDLE
    return out


def test_prefix_examples():
    assert mean_cost_prefix([10, 0, 0]) == F(10, 3)
    assert mean_cost_prefix([0, 0, 0, 0]) == 0
    with pytest.raises(EmptyPrefix):
        mean_cost_prefix([])


def test_discounted_sum_examples():
    assert discounted_sum([10] + [0] * 20, 0.5) == 10
    assert discounted_sum([0] * 5, 0.3) == 0
    d = 0.999
    seq = [10, 0, 0] * 20_000
    assert abs((1 - d) * discounted_sum(seq, d) - 10 / 3) < 0.01


def test_example1_optimum(region1):
    rep = optimize_mean_cost(region1)
    assert abs(rep.gain - 2.0) < 1e-6
    assert rep.strategy[region1.init] in (0, 1)
    assert abs(evaluate_strategy(region1, rep.strategy) - 2.0) < 1e-6


def test_example1_never_schedule_soft(m1):
    assert abs(evaluate_strategy(m1, never_soft(m1)) - 10 / 3) < 1e-6


def test_zero_cost_system():
    sys = TaskSystem((task("hard", {1: 1}, 2, {3: 1}), task("hard", {1: 1}, 3, {4: 1})))
    m = build_explicit(sys)
    region = safe_region(m)
    assert optimize_mean_cost(region).gain == 0
    assert evaluate_strategy(region, never_soft(m)) == 0


def test_non_total_strategy(region1):
    with pytest.raises(NonTotalStrategy):
        evaluate_strategy(region1, {})


def test_discounted_approaches_gain(region1):
    errs = []
    for d in (0.9, 0.99, 0.999):
        v, _ = optimize_discounted(region1, d)
        err = abs((1 - d) * v - 2.0)
        assert err <= 5 * (1 - d) * 10  # O(1-d) band, scaled by the largest cost
        errs.append(err)
    assert errs[0] > errs[1] > errs[2]


def test_stationary_distribution_periodic_chain():
    import scipy.sparse as sp

    P = sp.csr_matrix(np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]], dtype=float))
    assert np.allclose(stationary_distribution(P), [1 / 3] * 3)


def test_strategy_json_roundtrip(region1):
    sigma = optimize_mean_cost(region1).strategy
    assert strategy_from_json(json.loads(json.dumps(strategy_to_json(sigma)))) == sigma


def test_oracle_agrees_with_evaluator(region1, m1):
    sigma = optimize_mean_cost(region1).strategy
    assert abs(chain_gain(region1, sigma) - evaluate_strategy(region1, sigma)) < 1e-9


@pytest.mark.parametrize("name", ["example1", "example2", "simple"])
def test_rvi_matches_enumeration_on_fixtures(name):
    region = safe_region(build_explicit(load_fixture(name)))
    assert len(region.scheduler_vertices) <= 200
    best, count = brute_force_optimum(region)
    assert count >= 1
    assert abs(optimize_mean_cost(region).gain - best) < 1e-6


@settings(max_examples=25, deadline=None)
@given(small_systems())
def test_rvi_matches_enumeration_on_random_systems(sys):
    m = build_explicit(sys, max_vertices=5000)
    try:
        region = safe_region(m)
    except Unschedulable:
        return
    if len(region.scheduler_vertices) > 60:
        return
    try:
        best, _ = brute_force_optimum(region, limit=3000)
    except RuntimeError:
        return
    rep = optimize_mean_cost(region)
    assert abs(rep.gain - best) < 1e-6
    assert abs(evaluate_strategy(region, rep.strategy) - best) < 1e-6
