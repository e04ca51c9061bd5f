"""Online scheduling policies: EDF variants, uniform random over safe
actions, and tabular Q-learning with or without a shield.

Policies work on vertex ids of a :class:`~safesched.mdp.Semantics`; a
shield is any callable mapping a Scheduler vertex id to its allowed actions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

from .mdp import IDLE, GameVertex, Semantics
from .safety import SafeRegion
from .sim import SimEnv, UniformStream

Shield = Callable[[int], Sequence[int]]


class EmptySafeSet(ValueError):
    pass


class Policy(Protocol):
    def choose(self, vid: int, allowed: Sequence[int]) -> int: ...

    def observe(self, vid: int, a: int, cost: float, nxt: int, allowed_next: Sequence[int], terminal: bool) -> None: ...


# -- EDF ----------------------------------------------------------------------


def edf_hard(sys, v: GameVertex) -> int:
    """Earliest deadline among active hard jobs, else among active soft jobs, else idle."""
    best = None
    for group in (sys.hard, sys.soft):
        for i in group:
            s = v.states[i]
            if s.rct(0) != 1 and s.deadline > 0 and (best is None or s.deadline < best[0]):
                best = (s.deadline, i)
        if best is not None:
            return best[1]
    return IDLE


def edf_shield(sem: Semantics) -> Shield:
    """EDF on hard jobs; free choice (including idling) while no hard job is active."""
    sys = sem.sys
    cache: dict[int, tuple[int, ...]] = {}

    def allowed(vid: int) -> tuple[int, ...]:
        out = cache.get(vid)
        if out is None:
            v = sem.vertex(vid)
            acts = sem.actions(vid)
            hard_active = [i for i in sys.hard if i in acts]
            out = (edf_hard(sys, v),) if hard_active else acts
            cache[vid] = out
        return out

    return allowed


def mgs_shield(region: SafeRegion) -> Shield:
    safe = region.safe

    def allowed(vid: int) -> tuple[int, ...]:
        try:
            return safe[vid]
        except KeyError:
            raise EmptySafeSet(f"vertex {vid} is outside the safe region") from None

    return allowed


def no_shield(sem: Semantics) -> Shield:
    return sem.actions


def random_safe(safe_set: Sequence[int], rng: UniformStream) -> int:
    if len(safe_set) == 0:
        raise EmptySafeSet("no safe action")
    return safe_set[rng.integers(len(safe_set))]


class EdfPolicy:
    def __init__(self, sem: Semantics):
        self.sem = sem

    def choose(self, vid: int, allowed: Sequence[int]) -> int:
        return edf_hard(self.sem.sys, self.sem.vertex(vid))

    def observe(self, *args, **kwargs) -> None:
        pass


class RandomSafePolicy:
    def __init__(self, rng: UniformStream):
        self.rng = rng

    def choose(self, vid: int, allowed: Sequence[int]) -> int:
        return random_safe(allowed, self.rng)

    def observe(self, *args, **kwargs) -> None:
        pass


class StrategyPolicy:
    """Adapter for a memoryless strategy {vertex id: action}."""

    def __init__(self, sigma: dict[int, int], fallback: Policy | None = None):
        self.sigma = sigma
        self.fallback = fallback

    def choose(self, vid: int, allowed: Sequence[int]) -> int:
        a = self.sigma.get(vid)
        if a is None or a not in allowed:
            if self.fallback is None:
                raise KeyError(f"strategy undefined at {vid}")
            return self.fallback.choose(vid, allowed)
        return a

    def observe(self, *args, **kwargs) -> None:
        pass


# -- tabular Q-learning ----------------------------------------------------------


@dataclass
class QTable:
    alpha: float = 0.1
    discount: float = 0.99
    explore: float = 1.0
    values: dict[tuple[int, int], float] = field(default_factory=dict)
    visits: dict[tuple[int, int], int] = field(default_factory=dict)

    def q(self, v: int, a: int) -> float:
        return self.values.get((v, a), 0.0)

    def best(self, v: int, allowed: Sequence[int]) -> int:
        # minimisation; ties go to the first allowed action
        best_a, best_q = allowed[0], self.q(v, allowed[0])
        for a in allowed[1:]:
            q = self.q(v, a)
            if q < best_q:
                best_a, best_q = a, q
        return best_a


def q_update(table: QTable, v: int, a: int, cost: float, v_next: int | None, allowed_next: Sequence[int]) -> None:
    """Q(v,a) <- (1-alpha) Q(v,a) + alpha (cost + d * min_a' Q(v', a')).

    ``v_next=None`` marks a terminal transition (no bootstrap).
    """
    nxt = 0.0
    if v_next is not None and allowed_next:
        nxt = min(table.q(v_next, b) for b in allowed_next)
    key = (v, a)
    table.values[key] = (1 - table.alpha) * table.q(v, a) + table.alpha * (cost + table.discount * nxt)
    table.visits[key] = table.visits.get(key, 0) + 1


class QPolicy:
    """Exploration-greedy Q-learning restricted to the shield's actions.

    With ``penalty`` set, entering BOTTOM is charged ``penalty`` and treated
    as terminal (the unsafe baseline); with a proper shield that never happens.
    """

    def __init__(self, table: QTable, shield: Shield, rng: UniformStream, penalty: float = 0.0, learn: bool = True):
        self.table = table
        self.shield = shield
        self.rng = rng
        self.penalty = penalty
        self.learn = learn

    def allowed(self, vid: int) -> Sequence[int]:
        return self.shield(vid)

    def choose(self, vid: int, allowed: Sequence[int] | None = None) -> int:
        if allowed is None:
            allowed = self.shield(vid)
        if self.rng.next() < self.table.explore:
            return random_safe(allowed, self.rng)
        return self.table.best(vid, allowed)

    def observe(self, vid: int, a: int, cost: float, nxt: int, allowed_next: Sequence[int], terminal: bool) -> None:
        if not self.learn:
            return
        if terminal:
            q_update(self.table, vid, a, cost + self.penalty, None, ())
        else:
            q_update(self.table, vid, a, cost, nxt, allowed_next)


def shielded_q_policy(shield: Shield, table: QTable, rng: UniformStream) -> QPolicy:
    return QPolicy(table, shield, rng)


def unsafe_penalty_policy(sem: Semantics, table: QTable, penalty: float, rng: UniformStream) -> QPolicy:
    return QPolicy(table, no_shield(sem), rng, penalty=penalty)


def default_penalty(sys) -> float:
    return 1000.0 * float(sys.max_cost or 1)


@dataclass
class RunStats:
    steps: int
    cost: float
    hard_misses: int
    soft_misses: int

    @property
    def mean_cost(self) -> float:
        return self.cost / self.steps if self.steps else 0.0


def run_with_policy(env: SimEnv, policy, shield: Shield, steps: int, learn: bool = False,
                    anneal: tuple[float, float] | None = None, on_miss: str = "reset") -> RunStats:
    """Drive ``env`` for ``steps`` ticks. ``anneal=(start, end)`` linearly
    schedules the Q-policy's exploration rate over the run."""
    cost = 0.0
    misses = 0
    soft0 = env.soft_misses
    for t in range(steps):
        if anneal is not None:
            lo, hi = anneal
            policy.table.explore = lo + (hi - lo) * min(1.0, t / max(steps - 1, 1))
        v = env.vertex
        allowed = shield(v)
        a = policy.choose(v, allowed)
        if a not in allowed:
            raise AssertionError(f"policy left its shield at {v}: {a} not in {allowed}")
        obs = env.step(a)
        cost += float(obs.cost)
        if learn:
            if obs.hard_miss:
                policy.observe(v, a, float(obs.cost), obs.vertex, (), True)
            else:
                policy.observe(v, a, float(obs.cost), obs.vertex, shield(obs.vertex), False)
        if obs.hard_miss:
            misses += 1
            if on_miss == "stop":
                return RunStats(t + 1, cost, misses, env.soft_misses - soft0)
            env.reset()
    return RunStats(steps, cost, misses, env.soft_misses - soft0)


def train_q(env: SimEnv, policy: QPolicy, steps: int = 10_000, explore=(1.0, 0.02)) -> RunStats:
    policy.learn = True
    stats = run_with_policy(env, policy, policy.shield, steps, learn=True, anneal=explore, on_miss="reset")
    policy.table.explore = explore[1]
    return stats


def evaluate_q(env: SimEnv, policy: QPolicy, steps: int = 600, explore: float = 0.0) -> RunStats:
    policy.learn = False
    policy.table.explore = explore
    return run_with_policy(env, policy, policy.shield, steps, on_miss="reset")
