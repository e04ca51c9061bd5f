import sys
from fractions import Fraction
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from safesched.distributions import FiniteDistribution
from safesched.fixtures import load_fixture
from safesched.mdp import build_explicit
from safesched.safety import safe_region
from safesched.task_model import Kind, Task, TaskSystem


def task(kind, c, d, a, cost=0):
    return Task(FiniteDistribution(c), d, FiniteDistribution(a), Kind(kind), Fraction(cost))


@pytest.fixture(scope="session")
def ex1():
    return load_fixture("example1")


@pytest.fixture(scope="session")
def ex2():
    return load_fixture("example2")


@pytest.fixture(scope="session")
def m1(ex1):
    return build_explicit(ex1)


@pytest.fixture(scope="session")
def region1(m1):
    return safe_region(m1)


@pytest.fixture(scope="session")
def region2(ex2):
    return safe_region(build_explicit(ex2))


@pytest.fixture
def soft_only_ex1(ex1):
    return TaskSystem((ex1.tasks[1],), name="ex1-soft")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running statistical checks")
