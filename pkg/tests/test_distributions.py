from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from safesched.distributions import (
    DegenerateCondition,
    DistributionError,
    EmptySample,
    FiniteDistribution,
    ParameterOutOfRange,
    condition_nonzero,
    decrement,
    empirical,
    epsilon_close,
    hoeffding_samples,
    per_element_samples,
    support_min_max,
)


def D(m):
    return FiniteDistribution(m)


@pytest.mark.parametrize(
    "mass, expected",
    [({1: "0.4", 2: "0.6"}, (1, 2)), ({3: 1}, (3, 3)), ({1: "0.5", 4: "0.1", 5: "0.4"}, (1, 5))],
)
def test_support_min_max(mass, expected):
    assert support_min_max(D(mass)) == expected


def test_decimal_strings_parse_exactly():
    assert D({1: "0.4", 2: "0.6"})(1) == F(2, 5)


@pytest.mark.parametrize(
    "mass",
    [{1: "0.5", 2: "0.6"}, {1: "-0.1", 2: "1.1"}, {}, {-1: 1}],
)
def test_rejects_bad_mass(mass):
    with pytest.raises(DistributionError):
        D(mass)


def test_zero_probabilities_are_dropped():
    assert D({1: 0, 2: 1}).support == (2,)


@pytest.mark.parametrize(
    "mass, expected",
    [
        ({1: "0.5", 4: "0.1", 5: "0.4"}, {0: "0.5", 3: "0.1", 4: "0.4"}),
        ({3: 1}, {2: 1}),
        ({0: 1}, {0: 1}),
    ],
)
def test_decrement(mass, expected):
    assert decrement(D(mass)) == D(expected)


@pytest.mark.parametrize(
    "mass, expected",
    [
        ({0: "0.5", 3: "0.1", 4: "0.4"}, {3: "0.2", 4: "0.8"}),
        ({0: "0.4", 1: "0.6"}, {1: 1}),
        ({2: 1}, {2: 1}),
    ],
)
def test_condition_nonzero(mass, expected):
    assert condition_nonzero(D(mass)) == D(expected)


def test_condition_on_dirac_zero_fails():
    with pytest.raises(DegenerateCondition):
        condition_nonzero(D({0: 1}))


def test_epsilon_close_examples():
    p = D({1: "0.4", 2: "0.6"})
    assert epsilon_close(p, D({1: "0.45", 2: "0.55"}), "0.05")
    assert not epsilon_close(p, D({1: 1}), "0.5")
    assert epsilon_close(p, p, "0.01")
    assert not epsilon_close(p, D({1: "0.45", 2: "0.55"}), "0.04")


def test_empirical():
    e = empirical([1, 1, 2, 1], domain=[1, 2])
    assert e.distribution == D({1: F(3, 4), 2: F(1, 4)}) and not e.deficient
    assert empirical([3, 3, 3], [3]).distribution == D({3: 1})
    e = empirical([1, 2, 1, 2], domain=[1, 2, 4])
    assert e(1) == F(1, 2) and e(4) == 0 and e.missing == (4,) and e.deficient
    with pytest.raises(EmptySample):
        empirical([])


@pytest.mark.parametrize("r, eps, gamma, total", [(2, "0.1", "0.05", 440), (1, "0.1", "0.05", 185), (2, "0.5", "0.5", 10)])
def test_hoeffding_samples(r, eps, gamma, total):
    assert hoeffding_samples(r, F(eps), F(gamma)) == total


def test_hoeffding_per_element():
    assert per_element_samples(2, F("0.1"), F("0.05")) == 220


@pytest.mark.parametrize("args", [(0, 0.1, 0.1), (1, 0, 0.1), (1, 0.1, 1), (1, 1.5, 0.1)])
def test_hoeffding_parameter_range(args):
    with pytest.raises(ParameterOutOfRange):
        hoeffding_samples(*args)


masses = st.dictionaries(st.integers(0, 8), st.integers(1, 20), min_size=1, max_size=5).map(
    lambda m: D({k: F(v, sum(m.values())) for k, v in m.items()})
)


@given(masses)
def test_normalised_and_sorted(d):
    assert sum(d.probabilities) == 1
    assert list(d.support) == sorted(d.support)
    assert all(p > 0 for p in d.probabilities)


@given(masses)
def test_decrement_preserves_mass_and_shifts(d):
    e = decrement(d)
    assert sum(e.probabilities) == 1
    assert e.support[-1] == max(d.support[-1] - 1, 0)


@given(masses)
def test_condition_nonzero_is_bayes(d):
    if d(0) == 1:
        return
    c = condition_nonzero(d)
    assert c(0) == 0 and sum(c.probabilities) == 1
    for k in c.support:
        assert c(k) == d(k) / (1 - d(0))


@given(masses, st.fractions(0, 1))
def test_epsilon_close_reflexive(d, eps):
    assert epsilon_close(d, d, eps)


@given(st.integers(1, 6), st.floats(0.01, 0.9), st.floats(0.01, 0.9))
def test_hoeffding_monotone(r, eps, gamma):
    assert hoeffding_samples(r, eps / 2, gamma) >= hoeffding_samples(r, eps, gamma)
    assert hoeffding_samples(r, eps, gamma / 2) >= hoeffding_samples(r, eps, gamma)
    assert hoeffding_samples(r, eps, gamma) % r == 0


@given(masses)
def test_json_roundtrip(d):
    assert FiniteDistribution.from_json(d.to_json()) == d
