import json
from fractions import Fraction as F

import pytest

from conftest import task
from safesched.task_model import Kind, TaskSystem, max_deviation, structure, systems_epsilon_close, validate

EXAMPLE1_JSON = (
    '{"tasks":[{"kind":"hard","computation":{"1":"1"},"deadline":2,"arrival":{"3":"1"}},'
    '{"kind":"soft","cost":"10","computation":{"1":"0.4","2":"0.6"},"deadline":2,"arrival":{"3":"1"}}]}'
)


def test_example1_file_parses_and_matches_fixture(ex1):
    sys = TaskSystem.from_json(json.loads(EXAMPLE1_JSON))
    assert sys == ex1
    assert validate(sys) == []
    assert sys.soft == (1,) and sys.hard == (0,)
    assert ex1.tasks[1].miss_cost == 10


def test_validation_errors():
    assert [v.kind for v in validate(TaskSystem((task("hard", {1: 1}, 2, {1: 1}),)))] == ["DeadlineExceedsMinArrival"]
    assert [v.kind for v in validate(TaskSystem((task("hard", {3: 1}, 2, {4: 1}),)))] == ["ComputationExceedsDeadline"]
    assert [v.kind for v in validate(TaskSystem(()))] == ["EmptyTaskSystem"]


def test_structure(ex1, ex2):
    s1 = structure(ex1)
    assert (s1[0].computation_domain, s1[0].deadline, s1[0].arrival_domain, s1[0].kind) == ((1,), 2, (3,), Kind.HARD)
    assert (s1[1].computation_domain, s1[1].deadline, s1[1].arrival_domain, s1[1].kind) == ((1, 2), 2, (3,), Kind.SOFT)
    s2 = structure(ex2)
    assert (s2[0].computation_domain, s2[0].arrival_domain, s2[1].computation_domain, s2[1].arrival_domain) == ((2,), (4,), (1, 2), (3,))


def test_dirac_structure_is_singletons():
    sys = TaskSystem((task("soft", {1: 1}, 2, {3: 1}, 1), task("hard", {2: 1}, 2, {2: 1})))
    assert all(len(s.computation_domain) == 1 and len(s.arrival_domain) == 1 for s in structure(sys))


def test_systems_epsilon_close(ex1):
    other = ex1.with_tasks((ex1.tasks[0], task("soft", {1: "0.45", 2: "0.55"}, 2, {3: 1}, 10)))
    assert systems_epsilon_close(ex1, ex1, "0.01")
    assert systems_epsilon_close(ex1, other, "0.05")
    assert not systems_epsilon_close(ex1, other, "0.04")
    assert max_deviation(ex1, other) == F(1, 20)


def test_json_roundtrip(tmp_path, ex2):
    p = tmp_path / "s.json"
    ex2.save(p)
    assert TaskSystem.load(p) == ex2


def test_derived_quantities(ex1):
    assert ex1.c_max == 2 and ex1.a_max == 3 and ex1.d_max == 2
    assert ex1.pi_max == F(1) and ex1.max_cost == 10
    assert ex1.domain_max == 2


def test_scale_costs(ex1):
    assert ex1.scale_costs(F(1, 2)).tasks[1].miss_cost == 5
