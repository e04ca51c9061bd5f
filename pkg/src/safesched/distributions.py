"""Exact finite distributions over CPU-tick counts.

Probabilities are :class:`fractions.Fraction` everywhere so that two
game vertices built along different paths compare and hash identically.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

Number = Union[int, float, str, Fraction]


class DistributionError(ValueError):
    pass


class DegenerateCondition(DistributionError):
    """Conditioning on ``k > 0`` when all the mass sits at 0."""


class EmptySample(DistributionError):
    pass


class ParameterOutOfRange(DistributionError):
    pass


def to_fraction(x: Number) -> Fraction:
    """Parse a probability exactly.

    Strings go through :class:`Fraction` so ``"0.4"`` becomes ``2/5``;
    floats are converted by their shortest decimal repr for the same reason.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


class FiniteDistribution:
    """Immutable probability mass function on a finite set of naturals.

    Only the support is stored, in increasing key order.

    >>> d = FiniteDistribution({1: "0.4", 2: "0.6"})
    >>> d(2)
    Fraction(3, 5)
    """

    __slots__ = ("_items", "_hash")

    def __init__(self, mass: Mapping[int, Number] | Iterable[tuple[int, Number]]):
        pairs = mass.items() if isinstance(mass, Mapping) else mass
        acc: dict[int, Fraction] = {}
        for k, p in pairs:
            k = int(k)
            if k < 0:
                raise DistributionError(f"negative support point {k}")
            p = to_fraction(p)
            if p < 0:
                raise DistributionError(f"negative probability {p} at {k}")
            if p:
                acc[k] = acc.get(k, Fraction(0)) + p
        if not acc:
            raise DistributionError("empty support")
        total = sum(acc.values())
        if total != 1:
            raise DistributionError(f"probabilities sum to {total}, not 1")
        self._items: tuple[tuple[int, Fraction], ...] = tuple(sorted(acc.items()))
        self._hash = hash(self._items)

    @classmethod
    def dirac(cls, k: int) -> "FiniteDistribution":
        return cls({k: 1})

    @classmethod
    def uniform(cls, keys: Iterable[int]) -> "FiniteDistribution":
        keys = sorted(set(keys))
        return cls({k: Fraction(1, len(keys)) for k in keys})

    # mapping-ish access
    def __call__(self, k: int) -> Fraction:
        for key, p in self._items:
            if key == k:
                return p
        return Fraction(0)

    def items(self) -> tuple[tuple[int, Fraction], ...]:
        return self._items

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(k for k, _ in self._items)

    @property
    def probabilities(self) -> tuple[Fraction, ...]:
        return tuple(p for _, p in self._items)

    @property
    def is_dirac(self) -> bool:
        return len(self._items) == 1

    @property
    def min_probability(self) -> Fraction:
        return min(p for _, p in self._items)

    @property
    def max_probability(self) -> Fraction:
        return max(p for _, p in self._items)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FiniteDistribution):
            return NotImplemented
        return self._hash == other._hash and self._items == other._items

    def __hash__(self) -> int:
        return self._hash

    def __len__(self) -> int:
        return len(self._items)

    def __repr__(self) -> str:
        return f"FiniteDistribution({self.render()})"

    def render(self) -> str:
        """Compact form used in state tables: ``3`` for Dirac, else ``[1:2/5,2:3/5]``."""
        if self.is_dirac:
            return str(self._items[0][0])
        return "[" + ",".join(f"{k}:{p}" for k, p in self._items) + "]"

    def to_json(self) -> dict[str, str]:
        return {str(k): str(p) for k, p in self._items}

    @classmethod
    def from_json(cls, obj: Mapping[str, Number]) -> "FiniteDistribution":
        return cls({int(k): to_fraction(v) for k, v in obj.items()})


def support_min_max(d: FiniteDistribution) -> tuple[int, int]:
    s = d.support
    return s[0], s[-1]


_dec_cache: dict[FiniteDistribution, FiniteDistribution] = {}
_cond_cache: dict[FiniteDistribution, FiniteDistribution] = {}


def decrement(d: FiniteDistribution) -> FiniteDistribution:
    """Shift every support point down by one tick, flooring at 0."""
    out = _dec_cache.get(d)
    if out is None:
        out = FiniteDistribution((max(k - 1, 0), p) for k, p in d.items())
        _dec_cache[d] = out
    return out


def condition_nonzero(d: FiniteDistribution) -> FiniteDistribution:
    """Condition on the outcome being strictly positive."""
    out = _cond_cache.get(d)
    if out is None:
        p0 = d(0)
        if p0 == 1:
            raise DegenerateCondition("all mass at 0")
        if p0 == 0:
            out = d
        else:
            out = FiniteDistribution((k, p / (1 - p0)) for k, p in d.items() if k > 0)
        _cond_cache[d] = out
    return out


def epsilon_close(p: FiniteDistribution, q: FiniteDistribution, eps: Number) -> bool:
    """Same support and pointwise gap at most ``eps``."""
    eps = to_fraction(eps)
    if p.support != q.support:
        return False
    return all(abs(a - b) <= eps for a, b in zip(p.probabilities, q.probabilities))


class EmpiricalDistribution:
    """Relative frequencies of a sample over a declared domain.

    ``distribution`` holds the observed part (always normalised);
    ``missing`` lists declared domain points never observed. A result
    with ``missing`` non-empty is support-deficient and is *not* silently
    renormalised onto the declared domain.
    """

    __slots__ = ("distribution", "missing", "count")

    def __init__(self, distribution: FiniteDistribution, missing: tuple[int, ...], count: int):
        self.distribution = distribution
        self.missing = missing
        self.count = count

    @property
    def deficient(self) -> bool:
        return bool(self.missing)

    def __call__(self, k: int) -> Fraction:
        return self.distribution(k)

    def __repr__(self) -> str:
        flag = f", missing={list(self.missing)}" if self.missing else ""
        return f"EmpiricalDistribution({self.distribution.render()}, n={self.count}{flag})"


def empirical(samples: Sequence[int], domain: Iterable[int] = ()) -> EmpiricalDistribution:
    if len(samples) == 0:
        raise EmptySample("no samples")
    counts: dict[int, int] = {}
    for s in samples:
        counts[int(s)] = counts.get(int(s), 0) + 1
    return empirical_from_counts(counts, domain)


def empirical_from_counts(counts: Mapping[int, int], domain: Iterable[int] = ()) -> EmpiricalDistribution:
    n = sum(counts.values())
    if n == 0:
        raise EmptySample("no samples")
    dist = FiniteDistribution({k: Fraction(c, n) for k, c in counts.items() if c})
    missing = tuple(sorted(set(domain) - set(dist.support)))
    return EmpiricalDistribution(dist, missing, n)


def hoeffding_samples(r: int, eps: Number, gamma: Number) -> int:
    """Total sample count ``r * ceil((ln 2r - ln gamma) / (2 eps^2))``.

    Logs are evaluated in float64. If the unrounded per-element value is
    within 1e-9 of an integer one extra sample is added, so float error
    can never under-sample.
    """
    return r * per_element_samples(r, eps, gamma)


def per_element_samples(r: int, eps: Number, gamma: Number) -> int:
    eps_f, gamma_f = float(eps), float(gamma)
    if not (0 < eps_f < 1) or not (0 < gamma_f < 1) or r < 1:
        raise ParameterOutOfRange(f"need r>=1, eps, gamma in (0,1); got {r}, {eps}, {gamma}")
    raw = (math.log(2 * r) - math.log(gamma_f)) / (2 * eps_f * eps_f)
    m = math.ceil(raw)
    if abs(raw - round(raw)) < 1e-9:
        m = round(raw) + 1
    return m
