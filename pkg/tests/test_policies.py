from collections import Counter

import pytest

import figure1
from conftest import task
from safesched.distributions import FiniteDistribution
from safesched.fixtures import load_fixture
from safesched.mdp import IDLE, GameVertex, Owner, TaskState, build_explicit
from safesched.policies import (
    EdfPolicy,
    EmptySafeSet,
    QPolicy,
    QTable,
    RandomSafePolicy,
    StrategyPolicy,
    default_penalty,
    edf_hard,
    edf_shield,
    evaluate_q,
    mgs_shield,
    no_shield,
    q_update,
    random_safe,
    run_with_policy,
    train_q,
)
from safesched.safety import safe_region
from safesched.sim import SimEnv, UniformStream
from safesched.task_model import TaskSystem

D = FiniteDistribution.dirac


def _vertex(*states):
    return GameVertex(tuple(TaskState(D(c), d, D(a)) for c, d, a in states), Owner.SCHEDULER)


SYS3 = TaskSystem(
    (
        task("hard", {1: 1}, 5, {6: 1}),
        task("hard", {1: 1}, 3, {6: 1}),
        task("soft", {1: 1}, 2, {6: 1}, 1),
    )
)


def test_edf_picks_earliest_hard_deadline():
    assert edf_hard(SYS3, _vertex((1, 5, 6), (1, 3, 6), (1, 2, 6))) == 1


def test_edf_falls_back_to_soft():
    assert edf_hard(SYS3, _vertex((0, 5, 6), (0, 3, 6), (1, 2, 6))) == 2


def test_edf_idles_without_jobs():
    assert edf_hard(SYS3, _vertex((0, 5, 6), (0, 3, 6), (0, 2, 6))) == IDLE


def test_edf_tie_goes_to_lower_index():
    assert edf_hard(SYS3, _vertex((1, 3, 6), (1, 3, 6), (0, 2, 6))) == 0


def test_random_safe_uniform():
    rng = UniformStream(1)
    c = Counter(random_safe((0, 1), rng) for _ in range(10_000))
    assert abs(c[0] / 10_000 - 0.5) <= 0.02
    assert random_safe((IDLE,), rng) == IDLE
    with pytest.raises(EmptySafeSet):
        random_safe((), rng)


def test_mgs_shield_prunes_fatal_idle(m1, region1):
    shield = mgs_shield(region1)
    v7 = figure1.find(m1, figure1.v7)
    rng = UniformStream(3)
    assert all(random_safe(shield(v7), rng) != IDLE for _ in range(200))


def test_edf_shield_is_singleton_when_hard_active(m1):
    shield = edf_shield(m1.sem)
    assert shield(m1.sem.init) == (0,)
    v4 = figure1.find(m1, figure1.v4)
    assert shield(v4) == (0,)
    v6 = figure1.find(m1, figure1.v6)
    assert set(shield(v6)) == set(m1.sem.actions(v6))


def test_q_update_arithmetic():
    t = QTable(alpha=0.1, discount=0.99)
    q_update(t, 0, 1, 10.0, 5, (0, 1))
    assert t.q(0, 1) == pytest.approx(1.0)
    t2 = QTable()
    q_update(t2, 0, 1, 0.0, 5, (0, 1))
    assert t2.q(0, 1) == 0.0


def test_zero_penalty_terminal_is_cost_only():
    pol = QPolicy(QTable(), lambda v: (0,), UniformStream(0), penalty=0.0)
    pol.observe(0, 0, 0.0, 1, (), True)
    assert pol.table.q(0, 0) == 0.0
    pol = QPolicy(QTable(), lambda v: (0,), UniformStream(0), penalty=50.0)
    pol.observe(0, 0, 0.0, 1, (), True)
    assert pol.table.q(0, 0) == pytest.approx(5.0)


def test_full_exploration_is_uniform_over_shield(m1, region1):
    shield = mgs_shield(region1)
    pol = QPolicy(QTable(explore=1.0), shield, UniformStream(9))
    init = m1.sem.init
    c = Counter(pol.choose(init) for _ in range(9000))
    n = len(shield(init))
    assert set(c) == set(shield(init))
    assert all(abs(k / 9000 - 1 / n) < 0.03 for k in c.values())


def test_shielded_q_learning_never_misses_example1(ex1, m1, region1):
    env = SimEnv(ex1, 0, sem=m1.sem)  # poisoned: any miss would raise
    pol = QPolicy(QTable(), mgs_shield(region1), UniformStream(1))
    tr = train_q(env, pol, 10_000)
    ev = evaluate_q(env, pol, 600)
    assert tr.hard_misses == ev.hard_misses == 0


def test_q_learning_on_simple_reaches_zero_cost():
    sys = load_fixture("simple")
    m = build_explicit(sys)
    env = SimEnv(sys, 0, sem=m.sem)
    pol = QPolicy(QTable(), mgs_shield(safe_region(m)), UniformStream(1))
    train_q(env, pol, 10_000)
    assert evaluate_q(env, pol, 600).mean_cost <= 0.05


def test_unsafe_q_learning_misses_on_2h1s():
    sys = load_fixture("2H1S")
    m = build_explicit(sys)
    env = SimEnv(sys, 0, sem=m.sem, poison=False, log=False)
    pol = QPolicy(QTable(), no_shield(m.sem), UniformStream(1), penalty=default_penalty(sys))
    assert train_q(env, pol, 10_000).hard_misses >= 1


def test_soft_only_shield_is_vacuous():
    sys = load_fixture("5S")
    m = build_explicit(sys)
    region = safe_region(m)
    full, none = mgs_shield(region), no_shield(m.sem)
    assert all(tuple(full(v)) == tuple(none(v)) for v in m.scheduler_ids())


def test_strategy_policy_fallback(m1):
    pol = StrategyPolicy({}, EdfPolicy(m1.sem))
    assert pol.choose(m1.sem.init, m1.sem.actions(m1.sem.init)) == 0
    with pytest.raises(KeyError):
        StrategyPolicy({}).choose(m1.sem.init, (0,))


def test_run_with_policy_enforces_shield(ex1, m1):
    env = SimEnv(ex1, 0, sem=m1.sem)
    with pytest.raises(AssertionError):
        run_with_policy(env, EdfPolicy(m1.sem), lambda v: (IDLE,), 3)
