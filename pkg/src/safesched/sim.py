"""Seeded simulator of a task system.

The environment holds the true distributions and exposes only what a
scheduler could observe: which jobs arrived, which completed (and after how
many ticks of CPU), which soft jobs were killed and at what cost, and
whether a hard deadline was missed.

Randomness comes from numpy's Philox counter-based generator. Uniforms
are drawn in fixed-size blocks and each TaskGen move consumes exactly one,
so a trace is a pure function of (seed, action sequence).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .mdp import FIN, KILL, MISS, SUB, IllegalAction, Semantics, action_name
from .task_model import TaskSystem

GENERATOR_ID = "numpy-philox4x64-10"
_BLOCK = 1024


class Poisoned(RuntimeError):
    """A safe-mode environment was stepped after a hard deadline miss."""


class UniformStream:
    """Buffered float64 uniforms in [0, 1) from a Philox generator."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.Philox(self.seed))
        self._buf = np.empty(0)
        self._pos = 0
        self.drawn = 0

    def next(self) -> float:
        if self._pos >= len(self._buf):
            self._buf = self._gen.random(_BLOCK)
            self._pos = 0
        u = float(self._buf[self._pos])
        self._pos += 1
        self.drawn += 1
        return u

    def integers(self, n: int) -> int:
        """Uniform index in range(n) from one uniform draw."""
        return min(int(self.next() * n), n - 1)


@dataclass(frozen=True)
class Observation:
    tick: int  # ticks elapsed after this step
    action: int
    labels: tuple[str, ...]
    cost: Fraction
    arrivals: dict[int, int]  # task -> ticks since its previous release
    completions: dict[int, int]  # task -> CPU ticks the finished job received
    kills: tuple[int, ...]
    hard_miss: bool
    vertex: int  # next Scheduler vertex id


@dataclass
class _JobTrack:
    granted: int = 0
    since_release: int = 0
    done: bool = False


class SimEnv:
    """Ground-truth executable environment.

    ``sem`` may be shared with an explicit build so that vertex ids agree
    with a solved region. With ``poison=True`` (safe mode) any step after a
    hard miss raises :class:`Poisoned`; otherwise :meth:`reset` restarts
    the episode.
    """

    def __init__(
        self,
        sys: TaskSystem,
        seed: int = 0,
        sem: Semantics | None = None,
        poison: bool = True,
        late_miss_detection: bool = False,
        log: bool = True,
    ):
        self.sys = sys
        self.sem = sem if sem is not None else Semantics(sys, late_miss_detection)
        self.seed = seed
        self.rng = UniformStream(seed)
        self.poison = poison
        self.keep_log = log
        self.log: list[str] = []
        self.ticks = 0
        self.total_cost = Fraction(0)
        self.hard_misses = 0
        self.soft_misses = 0
        self.episodes = 1
        self._start_episode()

    def _start_episode(self) -> None:
        self.vertex = self.sem.init
        self.poisoned = False
        self._jobs = [_JobTrack() for _ in self.sys.tasks]

    def reset(self) -> int:
        """Restart from the initial vertex; counters and RNG carry on."""
        self.episodes += 1
        self._start_episode()
        return self.vertex

    @property
    def current(self):
        return self.sem.vertex(self.vertex)

    def allowed(self) -> tuple[int, ...]:
        return self.sem.actions(self.vertex)

    def step(self, a: int) -> Observation:
        if self.poisoned and self.poison:
            raise Poisoned("hard deadline already missed")
        v = self.vertex
        if self.sem.is_bottom(v):
            raise IllegalAction("environment is in BOTTOM; reset first")
        w = self.sem.post(v, a)
        row = self.sem.taskgen(w)
        k = row.sample(self.rng.next())
        labels, cost, nxt = row.labels[k], row.costs[k], row.succs[k]
        self.ticks += 1
        arrivals: dict[int, int] = {}
        completions: dict[int, int] = {}
        kills = []
        for i, job in enumerate(self._jobs):
            job.since_release += 1
            if i == a:
                job.granted += 1
            lab = labels[i]
            if lab == FIN:
                completions[i] = job.granted
                job.done = True
            elif lab == SUB:
                if not job.done:
                    completions[i] = job.granted
                arrivals[i] = job.since_release
                self._jobs[i] = _JobTrack()
            elif lab == KILL:
                kills.append(i)
                arrivals[i] = job.since_release
                self._jobs[i] = _JobTrack()
        hard_miss = self.sem.is_bottom(nxt)
        if hard_miss:
            self.hard_misses += 1
            self.poisoned = True
        self.soft_misses += len(kills)
        self.total_cost += cost
        self.vertex = nxt
        if self.keep_log:
            flags = "HARD_MISS" if hard_miss else "-"
            self.log.append(f"{self.ticks}; {action_name(a)}; {','.join(labels)}; {cost}; {flags}")
        return Observation(self.ticks, a, labels, cost, arrivals, completions, tuple(kills), hard_miss, nxt)

    def mean_cost(self) -> float:
        return mean_cost_of_run(self)

    def trace(self) -> str:
        name = self.sys.name or "system"
        head = f"# system={name} seed={self.seed} generator={GENERATOR_ID}"
        return "\n".join([head, *self.log]) + "\n"


def mean_cost_of_run(env: SimEnv) -> float:
    if env.ticks == 0:
        raise ValueError("no steps taken")
    return float(env.total_cost / env.ticks)


@dataclass
class ReplayReport:
    ok: bool
    steps: int
    first_error: str | None = None
    regenerated: bool | None = None  # re-simulation with the header seed matched byte-for-byte
    details: list[str] = field(default_factory=list)


def parse_trace(text: str) -> tuple[dict[str, str], list[tuple[int, str, tuple[str, ...], Fraction, str]]]:
    header: dict[str, str] = {}
    rows = []
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                if "=" in tok:
                    k, v = tok.split("=", 1)
                    header[k] = v
            continue
        tick, act, labs, cost, flags = (x.strip() for x in line.split(";"))
        rows.append((int(tick), act, tuple(labs.split(",")), Fraction(cost), flags))
    return header, rows


def _parse_action(s: str) -> int:
    return -1 if s == "eps" else int(s)


def replay(sys: TaskSystem, text: str, late_miss_detection: bool = False) -> ReplayReport:
    """Check a trace against the model: every action legal, every outcome
    possible, costs and flags consistent. If the header names a seed, also
    re-simulate and compare the log byte-for-byte."""
    header, rows = parse_trace(text)
    sem = Semantics(sys, late_miss_detection)
    v = sem.init
    for n, (tick, act, labels, cost, flags) in enumerate(rows, 1):
        err = None
        try:
            a = _parse_action(act)
            if sem.is_bottom(v):
                v = sem.init  # episode restart after a hard miss
            w = sem.post(v, a)
            row = sem.taskgen(w)
            nxt, k = sem.follow(v, a, labels)
            if row.costs[k] != cost:
                err = f"step {tick}: cost {cost} != {row.costs[k]}"
            elif (flags == "HARD_MISS") != sem.is_bottom(nxt):
                err = f"step {tick}: miss flag mismatch"
            v = nxt
        except (IllegalAction, ValueError) as e:
            err = f"step {tick}: {e}"
        if err:
            return ReplayReport(False, n - 1, err)
    regenerated = None
    if "seed" in header:
        env = SimEnv(sys, int(header["seed"]), late_miss_detection=late_miss_detection, poison=False)
        for _, act, *_ in rows:
            if env.sem.is_bottom(env.vertex):
                env.reset()
            env.step(_parse_action(act))
        body = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        regenerated = env.log == body
    return ReplayReport(regenerated is not False, len(rows), None if regenerated is not False else "re-simulation differs", regenerated)


def run_policy(env: SimEnv, choose, steps: int, on_miss: str = "stop") -> SimEnv:
    """Drive ``env`` with ``choose(env) -> action`` for ``steps`` ticks.

    ``on_miss``: "stop" ends the run at a hard miss, "reset" restarts the
    episode, "raise" lets the poisoned env raise on the next step.
    """
    for _ in range(steps):
        obs = env.step(choose(env))
        if obs.hard_miss:
            if on_miss == "stop":
                break
            if on_miss == "reset":
                env.reset()
    return env


def never_schedule(task: int):
    """Strategy that runs any task except ``task``, lowest index first; idles otherwise."""

    def choose(env: SimEnv) -> int:
        acts = [a for a in env.allowed() if a != task]
        return acts[0]

    return choose


def outcome_counts(env: SimEnv, choose, steps: int) -> dict[int, np.ndarray]:
    """Run and tally which outcome index was drawn at each TaskGen vertex."""
    counts: dict[int, np.ndarray] = {}
    for _ in range(steps):
        a = choose(env)
        v = env.vertex
        obs = env.step(a)
        w = env.sem.post(v, a)
        _, k = env.sem.follow(v, a, obs.labels)
        c = counts.get(w)
        if c is None:
            c = counts[w] = np.zeros(len(env.sem.taskgen(w).probs), dtype=np.int64)
        c[k] += 1
        if obs.hard_miss:
            env.reset()
    return counts


def simulate_sequence(sys: TaskSystem, seed: int, actions: Sequence[int]) -> SimEnv:
    env = SimEnv(sys, seed)
    for a in actions:
        env.step(a)
    return env
