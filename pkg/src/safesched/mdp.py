"""Game semantics of a task system: Scheduler moves, TaskGen moves, explicit builds.

A Scheduler vertex picks a task to run for one tick (or idles); the
TaskGen vertex that follows resolves, for every task independently,
whether the job finished, a new job arrived, a soft job was killed, or
nothing happened. One Scheduler edge plus one TaskGen edge is one CPU tick.

Vertices hold exact distributions, so they can be interned: the
:class:`Semantics` object maps each reachable vertex to a dense integer id
and caches its successors. Both the explicit builder and the on-the-fly
users (simulation, MCTS) go through it.
"""

from __future__ import annotations

import enum
import itertools
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

from .distributions import FiniteDistribution, condition_nonzero, decrement
from .task_model import TaskSystem

IDLE = -1

FIN = "fin"
SUB = "sub"
KILL = "killANDsub"
EPS = "eps"
MISS = "miss"


class MdpError(Exception):
    pass


class WrongOwner(MdpError):
    pass


class IllegalAction(MdpError):
    pass


class StateSpaceExceeded(MdpError):
    def __init__(self, limit: int):
        super().__init__(f"more than {limit} vertices")
        self.limit = limit


class Owner(enum.Enum):
    SCHEDULER = "S"
    TASKGEN = "T"


@dataclass(frozen=True)
class TaskState:
    rct: FiniteDistribution
    deadline: int
    arrival: FiniteDistribution

    def render(self) -> str:
        return f"({self.rct.render()},{self.deadline},{self.arrival.render()})"


@dataclass(frozen=True)
class GameVertex:
    states: tuple[TaskState, ...]
    owner: Owner
    # TaskGen only: the task whose job received its last tick of CPU on the
    # incoming Scheduler edge. Needed to label that completion `fin` rather
    # than `eps`; both lead to the same successor state.
    completing: int | None = None

    @property
    def is_bottom(self) -> bool:
        return not self.states

    def render(self) -> str:
        if self.is_bottom:
            return "BOT"
        tag = "S" if self.owner is Owner.SCHEDULER else "T"
        return tag + "".join(s.render() for s in self.states)


BOTTOM = GameVertex((), Owner.SCHEDULER)


class Outcome(NamedTuple):
    labels: tuple[str, ...]
    prob: Fraction
    cost: Fraction
    succ: GameVertex


def action_name(a: int) -> str:
    return "eps" if a == IDLE else str(a)


def action_sort_key(a: int) -> int:
    # tasks in index order, idle last
    return 1 << 30 if a == IDLE else a


def initial_vertex(sys: TaskSystem) -> GameVertex:
    return GameVertex(
        tuple(TaskState(t.computation, t.deadline, t.arrival) for t in sys.tasks),
        Owner.SCHEDULER,
    )


def active(v: GameVertex) -> tuple[int, ...]:
    return tuple(i for i, s in enumerate(v.states) if s.rct(0) != 1 and s.deadline > 0)


def scheduler_actions(v: GameVertex) -> tuple[int, ...]:
    if v.is_bottom or v.owner is not Owner.SCHEDULER:
        raise WrongOwner(f"not a Scheduler vertex: {v.render()}")
    return active(v) + (IDLE,)


def apply_scheduler(v: GameVertex, a: int) -> GameVertex:
    if a not in scheduler_actions(v):
        raise IllegalAction(f"action {action_name(a)} not available at {v.render()}")
    states = []
    completing = None
    for i, s in enumerate(v.states):
        rct = s.rct
        if i == a:
            rct = decrement(rct)
            if rct(0) == 1:
                completing = i
        states.append(TaskState(rct, max(s.deadline - 1, 0), decrement(s.arrival)))
    return GameVertex(tuple(states), Owner.TASKGEN, completing)


def hard_miss(sys: TaskSystem, v: GameVertex, late: bool = False) -> bool:
    """Whether a hard job is already doomed in TaskGen vertex ``v``.

    Default rule: the smallest possible remaining computation exceeds the
    time left. ``late=True`` only flags jobs that are unfinished at d=0.
    """
    for i in sys.hard:
        s = v.states[i]
        if late:
            if s.rct(0) == 0 and s.deadline == 0:
                return True
        elif s.rct.support[0] > s.deadline:
            return True
    return False


def _task_cases(sys: TaskSystem, v: GameVertex, i: int):
    """Per-task (label, probability, new state) triples with positive probability."""
    task = sys.tasks[i]
    s = v.states[i]
    c0, a0 = s.rct(0), s.arrival(0)
    fresh = TaskState(task.computation, task.deadline, task.arrival)
    cases = []
    if c0 == 1:
        live = v.completing == i
        if a0 < 1:
            cases.append((FIN if live else EPS, 1 - a0, TaskState(s.rct, s.deadline, condition_nonzero(s.arrival))))
        if a0 > 0:
            cases.append((SUB, a0, fresh))
        return cases
    if c0 > 0 and a0 < 1:
        cases.append((FIN, c0 * (1 - a0), TaskState(FiniteDistribution.dirac(0), s.deadline, condition_nonzero(s.arrival))))
    if c0 > 0 and a0 > 0:
        cases.append((SUB, c0 * a0, fresh))
    if a0 > 0:
        # the running job is unfinished when the next one arrives
        cases.append((MISS if task.hard else KILL, (1 - c0) * a0, fresh))
    if a0 < 1:
        cases.append((EPS, (1 - c0) * (1 - a0), TaskState(condition_nonzero(s.rct), s.deadline, condition_nonzero(s.arrival))))
    return cases


def taskgen_outcomes(sys: TaskSystem, v: GameVertex, late_miss_detection: bool = False) -> list[Outcome]:
    """All TaskGen moves from ``v`` with positive probability.

    A doomed hard job sends the whole vertex to BOTTOM with probability 1.
    Joint outcomes in which some hard job is overtaken by its successor
    are merged into a single BOTTOM edge.
    """
    if v.is_bottom or v.owner is not Owner.TASKGEN:
        raise WrongOwner(f"not a TaskGen vertex: {v.render()}")
    n = len(sys.tasks)
    if hard_miss(sys, v, late_miss_detection):
        return [Outcome((EPS,) * n, Fraction(1), Fraction(0), BOTTOM)]
    per_task = [_task_cases(sys, v, i) for i in range(n)]
    out: list[Outcome] = []
    miss_prob = Fraction(0)
    for combo in itertools.product(*per_task):
        labels = tuple(c[0] for c in combo)
        prob = Fraction(1)
        for c in combo:
            prob *= c[1]
        if MISS in labels:
            miss_prob += prob
            continue
        cost = sum((sys.tasks[i].miss_cost for i, lab in enumerate(labels) if lab == KILL), Fraction(0))
        succ = GameVertex(tuple(c[2] for c in combo), Owner.SCHEDULER)
        out.append(Outcome(labels, prob, cost, succ))
    if miss_prob:
        labels = tuple(MISS if (i in sys.hard and any(c[0] == MISS for c in per_task[i])) else EPS for i in range(n))
        out.append(Outcome(labels, miss_prob, Fraction(0), BOTTOM))
    return out


class TaskGenRow(NamedTuple):
    """Cached TaskGen successors of one vertex, in canonical order."""

    labels: tuple[tuple[str, ...], ...]
    probs: tuple[Fraction, ...]
    costs: tuple[Fraction, ...]
    succs: tuple[int, ...]
    cum: tuple[float, ...]  # float64 cumulative probabilities, last == 1.0

    def sample(self, u: float) -> int:
        """Index of the outcome selected by uniform ``u`` in [0, 1)."""
        return min(bisect_right(self.cum, u), len(self.cum) - 1)


def _cumulative(probs: Sequence[Fraction]) -> tuple[float, ...]:
    # exact running sums, each rounded once to the nearest float
    acc = Fraction(0)
    out = []
    for p in probs:
        acc += p
        out.append(float(acc))
    out[-1] = 1.0
    return tuple(out)


class Semantics:
    """Interned, memoised successor functions for one task system."""

    def __init__(self, sys: TaskSystem, late_miss_detection: bool = False):
        self.sys = sys
        self.late_miss_detection = late_miss_detection
        self.vertices: list[GameVertex] = []
        self.index: dict[GameVertex, int] = {}
        self._sched: dict[int, tuple[tuple[int, int], ...]] = {}
        self._tg: dict[int, TaskGenRow] = {}
        self.init = self.intern(initial_vertex(sys))

    def __len__(self) -> int:
        return len(self.vertices)

    def intern(self, v: GameVertex) -> int:
        vid = self.index.get(v)
        if vid is None:
            vid = len(self.vertices)
            self.vertices.append(v)
            self.index[v] = vid
        return vid

    def vertex(self, vid: int) -> GameVertex:
        return self.vertices[vid]

    def is_scheduler(self, vid: int) -> bool:
        return self.vertices[vid].owner is Owner.SCHEDULER

    def is_bottom(self, vid: int) -> bool:
        return self.vertices[vid].is_bottom

    def scheduler_edges(self, vid: int) -> tuple[tuple[int, int], ...]:
        """(action, TaskGen id) pairs; BOTTOM has a single idle self-loop."""
        row = self._sched.get(vid)
        if row is None:
            v = self.vertices[vid]
            if v.is_bottom:
                row = ((IDLE, vid),)
            else:
                row = tuple((a, self.intern(apply_scheduler(v, a))) for a in scheduler_actions(v))
            self._sched[vid] = row
        return row

    def actions(self, vid: int) -> tuple[int, ...]:
        return tuple(a for a, _ in self.scheduler_edges(vid))

    def post(self, vid: int, a: int) -> int:
        for b, w in self.scheduler_edges(vid):
            if b == a:
                return w
        raise IllegalAction(f"action {action_name(a)} not available at {self.vertices[vid].render()}")

    def taskgen(self, vid: int) -> TaskGenRow:
        row = self._tg.get(vid)
        if row is None:
            outs = taskgen_outcomes(self.sys, self.vertices[vid], self.late_miss_detection)
            probs = tuple(o.prob for o in outs)
            row = TaskGenRow(
                tuple(o.labels for o in outs),
                probs,
                tuple(o.cost for o in outs),
                tuple(self.intern(o.succ) for o in outs),
                _cumulative(probs),
            )
            self._tg[vid] = row
        return row

    def follow(self, vid: int, a: int, labels: Sequence[str]) -> tuple[int, int]:
        """Scheduler vertex and outcome index reached from ``vid`` by action ``a``
        and the TaskGen outcome carrying ``labels``."""
        w = self.post(vid, a)
        if self.is_bottom(w):
            return w, 0
        row = self.taskgen(w)
        labels = tuple(labels)
        for k, lab in enumerate(row.labels):
            if lab == labels:
                return row.succs[k], k
        raise IllegalAction(f"outcome {','.join(labels)} impossible at {self.vertices[w].render()}")

    def successors(self, vid: int) -> Iterable[int]:
        if self.is_scheduler(vid):
            return [w for _, w in self.scheduler_edges(vid)]
        return self.taskgen(vid).succs


@dataclass
class ExplicitMdp:
    """Reachable part of the game, with ids in BFS order from the initial vertex.

    Vertex ids are those of ``sem``; BFS interns in discovery order, so
    ids 0..n-1 are exactly the reachable vertices.
    """

    sem: Semantics
    n: int
    bottom: int | None

    @property
    def sys(self) -> TaskSystem:
        return self.sem.sys

    @property
    def init(self) -> int:
        return self.sem.init

    @property
    def vertices(self) -> list[GameVertex]:
        return self.sem.vertices[: self.n]

    def scheduler_ids(self) -> list[int]:
        return [v for v in range(self.n) if self.sem.is_scheduler(v)]

    def taskgen_ids(self) -> list[int]:
        return [v for v in range(self.n) if not self.sem.is_scheduler(v)]

    def successors(self, vid: int):
        return self.sem.successors(vid)

    def num_edges(self) -> int:
        return sum(len(tuple(self.successors(v))) for v in range(self.n))

    def pi_min_edge(self) -> Fraction:
        """Smallest TaskGen edge probability in the whole graph."""
        return min(min(self.sem.taskgen(v).probs) for v in self.taskgen_ids())

    def edges(self):
        """(src, dst, prob, cost, label) for every edge, Scheduler edges with prob 1."""
        for v in range(self.n):
            if self.sem.is_scheduler(v):
                for a, w in self.sem.scheduler_edges(v):
                    yield v, w, Fraction(1), Fraction(0), action_name(a)
            else:
                row = self.sem.taskgen(v)
                for lab, p, c, w in zip(row.labels, row.probs, row.costs, row.succs):
                    yield v, w, p, c, ",".join(lab)


def build_explicit(sys: TaskSystem, max_vertices: int = 1_000_000, late_miss_detection: bool = False) -> ExplicitMdp:
    sem = Semantics(sys, late_miss_detection)
    queue = deque([sem.init])
    seen = {sem.init}
    while queue:
        v = queue.popleft()
        for w in sem.successors(v):
            if w not in seen:
                seen.add(w)
                queue.append(w)
        if len(sem) > max_vertices:
            raise StateSpaceExceeded(max_vertices)
    bottom = sem.index.get(BOTTOM)
    return ExplicitMdp(sem, len(sem), bottom)


def state_space_estimate(sys: TaskSystem) -> int:
    out = 1
    for t in sys.tasks:
        out *= (t.computation.support[-1] + 1) * (t.arrival.support[-1] + 1)
    return out


# -- exports -----------------------------------------------------------------


def to_transitions(m: ExplicitMdp) -> str:
    lines = [f"{s} {d} {p} {c} {lab}" for s, d, p, c, lab in m.edges()]
    return "\n".join(lines) + "\n"


def to_state_table(m: ExplicitMdp) -> str:
    lines = []
    for v in range(m.n):
        vert = m.sem.vertex(v)
        owner = "bot" if vert.is_bottom else ("sched" if vert.owner is Owner.SCHEDULER else "taskgen")
        lines.append(f"{v} {owner} {vert.render()}")
    return "\n".join(lines) + "\n"


def to_dot(m: ExplicitMdp, max_vertices: int = 2000) -> str:
    if m.n > max_vertices:
        raise StateSpaceExceeded(max_vertices)
    out = ["digraph mdp {"]
    for v in range(m.n):
        vert = m.sem.vertex(v)
        shape = "box" if vert.owner is Owner.SCHEDULER else "ellipse"
        label = "⊥" if vert.is_bottom else "\\n".join(s.render() for s in vert.states)
        out.append(f'  {v} [shape={shape}, label="{label}"];')
    for s, d, p, c, lab in m.edges():
        extra = "" if p == 1 else f" {p}"
        extra += "" if c == 0 else f" cost={c}"
        out.append(f'  {s} -> {d} [label="{lab}{extra}"];')
    out.append("}")
    return "\n".join(out) + "\n"


def parse_transitions(text: str) -> list[tuple[int, int, Fraction, Fraction, str]]:
    out = []
    for line in text.splitlines():
        if not line.strip():
            continue
        s, d, p, c, lab = line.split(" ", 4)
        out.append((int(s), int(d), Fraction(p), Fraction(c), lab))
    return out
