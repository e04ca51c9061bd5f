"""PAC learning of task-system distributions by observing executions, the
sample/step bounds that go with it, and the robustness calculators that
turn a learning precision into a mean-cost guarantee.

Sampling rules:

* an arrival sample is the tick gap between two consecutive releases of a
  task; arrivals do not depend on scheduling, so every gap is counted;
* a computation sample is the CPU time of a job that ran to completion,
  and it is only counted for jobs whose completion was guaranteed from the
  moment they were released (otherwise short jobs would be over-represented).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import numpy as np

from .distributions import FiniteDistribution, empirical_from_counts, per_element_samples, to_fraction
from .mdp import KILL, SUB, IllegalAction, Semantics
from .policies import edf_hard, random_safe
from .safety import EfficientReport, SafeRegion, SamplingVerdict
from .sim import SimEnv
from .task_model import Task, TaskSystem


class HardTasksPresent(ValueError):
    pass


class ConditionNotCertified(RuntimeError):
    pass


class SafetyViolation(RuntimeError):
    pass


class DenominatorNonpositive(ValueError):
    pass


class Mode(enum.Enum):
    SOFT_ONLY = "soft-only"
    HARD_ONLY = "hard-only"  # learn hard tasks and all arrivals; soft computation times left as given
    GOOD_FOR_SAMPLING = "sampling"
    GOOD_FOR_EFFICIENT_SAMPLING = "efficient"


@dataclass(frozen=True)
class LearnConfig:
    eps: Fraction
    gamma: Fraction
    seed: int = 0
    mode: Mode = Mode.SOFT_ONLY
    step_budget: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "eps", to_fraction(self.eps))
        object.__setattr__(self, "gamma", to_fraction(self.gamma))
        if not (0 < self.eps < 1 and 0 < self.gamma < 1):
            raise ValueError("eps and gamma must lie in (0, 1)")


Key = tuple[int, str]  # (task, "C" or "A")


@dataclass
class LearnedModel:
    system: TaskSystem
    counts: dict[Key, int]
    targets: dict[Key, int]
    steps: int
    deficient: list[Key]
    complete: bool
    samples: dict[Key, dict[int, int]] = field(repr=False, default_factory=dict)

    def provenance(self) -> dict:
        return {
            "steps": self.steps,
            "complete": self.complete,
            "counts": {f"{i}{k}": n for (i, k), n in sorted(self.counts.items())},
            "targets": {f"{i}{k}": n for (i, k), n in sorted(self.targets.items())},
            "deficient": [f"{i}{k}" for i, k in self.deficient],
        }


# -- bounds ---------------------------------------------------------------------


def _ceil_log_term(count: int, dd: int, eps, gamma) -> int:
    """ceil((ln 4 D count - ln gamma) / (2 eps^2)), float64 with the same guard as the per-distribution sample counts."""
    return per_element_samples(2 * dd * count, eps, gamma)


def soft_only_formula(n_soft: int, a_max: int, dd: int, eps, gamma) -> int:
    """|F| * A_max * D * ceil((ln 4 D |F| - ln gamma) / (2 eps^2))."""
    return n_soft * a_max * dd * _ceil_log_term(n_soft, dd, eps, gamma)


def steps_bound_soft_only(sys: TaskSystem, eps, gamma) -> int:
    """Step bound of the soft-only learner, with D the largest domain of any
    distribution (computation times included, as the sample counts need)."""
    if sys.hard:
        raise HardTasksPresent("soft-only bound needs H = {}")
    return soft_only_formula(len(sys.soft), sys.a_max, sys.domain_max, eps, gamma)


def phase_length_bound(sys: TaskSystem, eps, gamma) -> int:
    """T = A_max * D * ceil((ln 4 D |Y| - ln gamma) / (2 eps^2))."""
    dd = sys.domain_max
    return sys.a_max * dd * _ceil_log_term(len(sys), dd, eps, gamma)


def steps_bound_efficient(sys: TaskSystem, eps, gamma, k_ticks: int) -> int:
    t = phase_length_bound(sys, eps, gamma)
    return t + len(sys.soft) * (t + k_ticks)


def sample_target(sys: TaskSystem, eps, gamma, n_dists: int) -> int:
    """Per-distribution sample count D * ceil((ln 2D - ln(gamma / n_dists)) / (2 eps^2)) with
    D the largest domain, so every distribution gets the same target."""
    r = sys.domain_max
    return r * per_element_samples(r, eps, Fraction(to_fraction(gamma)) / n_dists)


def eta_from_eps(sys: TaskSystem, eps) -> Fraction:
    """eta = s^(2n) - (s - eps)^(2n) with s = min(1, pi_max + eps), exactly."""
    eps = to_fraction(eps)
    n = len(sys)
    s = min(Fraction(1), sys.pi_max + eps)
    return s ** (2 * n) - (s - eps) ** (2 * n)


def eta_from_eps_raw(n: int, pi_max, eps) -> Fraction:
    eps, pi_max = to_fraction(eps), to_fraction(pi_max)
    s = min(Fraction(1), pi_max + eps)
    return s ** (2 * n) - (s - eps) ** (2 * n)


def eta_beta_threshold(beta, pi_min_edge, n_sched_vertices: int) -> Fraction:
    return to_fraction(beta) * to_fraction(pi_min_edge) / (8 * n_sched_vertices)


def eps_for_robustness(beta, pi_min_edge, n_sched_vertices: int) -> Fraction:
    bp = to_fraction(beta) * to_fraction(pi_min_edge)
    return bp / (8 * n_sched_vertices + bp)


def perturbation_gap(n_sched_vertices: int, eta, pi_min_edge) -> float:
    """4 |V| (eta / pi_min) / (1 - 2 |V| eta / pi_min)."""
    x = to_fraction(eta) / to_fraction(pi_min_edge)
    den = 1 - 2 * n_sched_vertices * x
    if den <= 0:
        raise DenominatorNonpositive("2|V| eta / pi_min must be < 1")
    return float(4 * n_sched_vertices * x / den)


# -- sample bookkeeping ---------------------------------------------------------------


class SampleBook:
    def __init__(self, sys: TaskSystem, eps, gamma, learn: list[Key]):
        self.sys = sys
        self.learn = list(learn)
        n_d = len(self.learn)
        self.targets = {
            k: sample_target(sys, eps, gamma, n_d) for k in self.learn
        }
        self.samples: dict[Key, dict[int, int]] = {k: {} for k in self.learn}

    def _dist(self, k: Key) -> FiniteDistribution:
        t = self.sys.tasks[k[0]]
        return t.computation if k[1] == "C" else t.arrival

    def add(self, k: Key, value: int) -> None:
        if k in self.samples:
            bucket = self.samples[k]
            bucket[value] = bucket.get(value, 0) + 1

    def count(self, k: Key) -> int:
        return sum(self.samples.get(k, {}).values())

    def done(self, k: Key) -> bool:
        return k not in self.targets or self.count(k) >= self.targets[k]

    def all_done(self, keys=None) -> bool:
        return all(self.done(k) for k in (self.learn if keys is None else keys))

    def observe_arrivals(self, obs) -> None:
        for i, gap in obs.arrivals.items():
            self.add((i, "A"), gap)

    def model(self, steps: int) -> LearnedModel:
        tasks = []
        deficient = []
        for i, t in enumerate(self.sys.tasks):
            new = {}
            for kind, dist in (("C", t.computation), ("A", t.arrival)):
                k = (i, kind)
                bucket = self.samples.get(k)
                if k not in self.samples:
                    new[kind] = dist  # not learned: keep the given one
                    continue
                if not bucket:
                    deficient.append(k)
                    new[kind] = dist
                    continue
                emp = empirical_from_counts(bucket, dist.support)
                if emp.deficient or self.count(k) < self.targets[k]:
                    deficient.append(k)
                new[kind] = emp.distribution
            tasks.append(Task(new["C"], t.deadline, new["A"], t.kind, t.miss_cost))
        counts = {k: self.count(k) for k in self.learn}
        complete = all(counts[k] >= self.targets[k] for k in self.learn)
        return LearnedModel(
            TaskSystem(tuple(tasks), name=(self.sys.name + "-learned") if self.sys.name else "learned"),
            counts,
            dict(self.targets),
            steps,
            deficient,
            complete,
            {k: dict(v) for k, v in self.samples.items()},
        )


def _over_budget(cfg: LearnConfig, env: SimEnv, start: int) -> bool:
    return cfg.step_budget is not None and env.ticks - start >= cfg.step_budget


def _step(env: SimEnv, a: int, book: SampleBook):
    obs = env.step(a)
    if obs.hard_miss:
        raise SafetyViolation(f"hard deadline missed at tick {obs.tick}")
    book.observe_arrivals(obs)
    return obs


def _active(env: SimEnv, i: int) -> bool:
    return i in env.allowed()


# -- learners -------------------------------------------------------------------


def learn_soft_only(env: SimEnv, cfg: LearnConfig) -> LearnedModel:
    """One phase per soft task: that task runs whenever it has a live job
    (others by EDF otherwise) until both of its distributions are covered."""
    sys = env.sys
    if sys.hard:
        raise HardTasksPresent("soft-only learner needs H = {}")
    keys = [(i, k) for i in sys.soft for k in ("C", "A")]
    book = SampleBook(sys, cfg.eps, cfg.gamma, keys)
    start = env.ticks
    for i in sys.soft:
        # a job of i counts only if it was released during this phase
        tracked = env.ticks == 0 and env.vertex == env.sem.init
        while not (book.done((i, "C")) and book.done((i, "A"))):
            if _over_budget(cfg, env, start):
                return book.model(env.ticks - start)
            a = i if _active(env, i) else edf_hard(sys, env.current)
            obs = _step(env, a, book)
            if i in obs.completions and tracked:
                book.add((i, "C"), obs.completions[i])
            if i in obs.arrivals:
                tracked = True
        # other tasks' computation samples from this phase are discarded
    return book.model(env.ticks - start)


def _hard_phase(env: SimEnv, book: SampleBook, cfg: LearnConfig, start: int) -> bool:
    """Run EDF on hard tasks until hard computation and all arrival samples
    are covered. Returns False if the budget ran out."""
    sys = env.sys
    keys = [(i, "C") for i in sys.hard] + [(i, "A") for i in range(len(sys))]
    keys = [k for k in keys if k in book.targets]
    while not book.all_done(keys):
        if _over_budget(cfg, env, start):
            return False
        obs = _step(env, edf_hard(sys, env.current), book)
        for i, c in obs.completions.items():
            if i in sys.hard:
                book.add((i, "C"), c)
    return True


def learn_safe(
    env: SimEnv,
    region: SafeRegion,
    cfg: LearnConfig,
    sampling: Mapping[int, SamplingVerdict] | None = None,
    efficient: EfficientReport | None = None,
) -> LearnedModel:
    """Safe learning in the presence of hard tasks.

    The environment must share ``region``'s semantics so that vertex ids agree.
    """
    sys = env.sys
    if env.sem is not region.mdp.sem:
        raise ValueError("env and region must share one Semantics")
    mode = cfg.mode
    if mode is Mode.SOFT_ONLY:
        raise ValueError("use learn_soft_only for systems without hard tasks")
    if mode is Mode.GOOD_FOR_SAMPLING and (sampling is None or not all(v.ok for v in sampling.values())):
        raise ConditionNotCertified("system is not certified good for sampling")
    if mode is Mode.GOOD_FOR_EFFICIENT_SAMPLING and (efficient is None or not efficient.ok):
        raise ConditionNotCertified("system is not certified good for efficient sampling")
    learn_soft_c = mode is not Mode.HARD_ONLY
    keys = [(i, "A") for i in range(len(sys))] + [(i, "C") for i in sys.hard]
    if learn_soft_c:
        keys += [(i, "C") for i in sys.soft]
    book = SampleBook(sys, cfg.eps, cfg.gamma, keys)
    start = env.ticks
    if not _hard_phase(env, book, cfg, start):
        return book.model(env.ticks - start)
    if not learn_soft_c:
        return book.model(env.ticks - start)
    for i in sys.soft:
        if mode is Mode.GOOD_FOR_SAMPLING:
            ok = _sampling_phase(env, region, sampling[i], book, cfg, start, i)
        else:
            ok = _efficient_phase(env, region, efficient.per_task[i], book, cfg, start, i)
        if not ok:
            break
    return book.model(env.ticks - start)


def _sampling_phase(env, region, verdict: SamplingVerdict, book, cfg, start, i) -> bool:
    entries = set(verdict.witnesses)
    sigma = verdict.strategy
    tracking = False
    while not book.done((i, "C")):
        if _over_budget(cfg, env, start):
            return False
        v = env.vertex
        a = sigma[v] if tracking else random_safe(region.safe[v], env.rng)
        obs = _step(env, a, book)
        if tracking and i in obs.completions:
            book.add((i, "C"), obs.completions[i])
            tracking = False
        if obs.labels[i] in (SUB, KILL) and obs.vertex in entries:
            tracking = True
    return True


def _efficient_phase(env, region, verdict, book, cfg, start, i) -> bool:
    safe_i = set(verdict.safe_set)
    tracking = False
    while not book.done((i, "C")):
        if _over_budget(cfg, env, start):
            return False
        v = env.vertex
        a = verdict.keep_safe[v] if v in safe_i else verdict.reach[v]
        obs = _step(env, a, book)
        if tracking and i in obs.completions:
            book.add((i, "C"), obs.completions[i])
            tracking = False
        if i in obs.arrivals:
            tracking = obs.vertex in safe_i
    return True


def learn_iid(sys: TaskSystem, cfg: LearnConfig, learn: list[Key] | None = None) -> LearnedModel:
    """Draw the required sample counts directly from each distribution.

    A stand-in for the executing learners when the required counts are far
    beyond what a tick-level simulation can afford; the samples have the
    same law as those collected by the safe learners.
    """
    if learn is None:
        learn = [(i, k) for i in range(len(sys)) for k in ("C", "A")]
    book = SampleBook(sys, cfg.eps, cfg.gamma, learn)
    gen = np.random.Generator(np.random.Philox(cfg.seed))
    for k in learn:
        d = book._dist(k)
        draws = gen.multinomial(book.targets[k], [float(p) for p in d.probabilities])
        book.samples[k] = {x: int(c) for x, c in zip(d.support, draws) if c}
    return book.model(0)


# -- moving strategies between structurally equal systems ------------------------------


def transfer_strategy(src: Semantics, sigma: Mapping[int, int], dst: Semantics, fallback=None) -> dict[int, int]:
    """Re-key a memoryless strategy from ``src`` vertex ids to ``dst`` ids.

    Both systems must share their structure. Vertices are matched by
    walking both games in lock-step along identical outcome labels; an
    outcome that has probability 0 in ``src`` leaves its ``dst`` vertex to
    ``fallback(dst_vid)`` (default: first available action).
    """
    out: dict[int, int] = {}
    pair: dict[int, int | None] = {dst.init: src.init}
    queue = [dst.init]
    while queue:
        dv = queue.pop()
        if dst.is_bottom(dv):
            continue
        sv = pair[dv]
        a = sigma.get(sv) if sv is not None else None
        if a is None or a not in dst.actions(dv):
            a = fallback(dv) if fallback else dst.actions(dv)[0]
        out[dv] = a
        row = dst.taskgen(dst.post(dv, a))
        for lab, du in zip(row.labels, row.succs):
            if du in pair:
                continue
            su = None
            if sv is not None:
                try:
                    su, _ = src.follow(sv, a, lab)
                except IllegalAction:
                    su = None
            pair[du] = su
            queue.append(du)
    return out


__all__ = [
    "ConditionNotCertified",
    "HardTasksPresent",
    "LearnConfig",
    "LearnedModel",
    "Mode",
    "SafetyViolation",
    "eps_for_robustness",
    "eta_beta_threshold",
    "eta_from_eps",
    "learn_iid",
    "learn_safe",
    "learn_soft_only",
    "perturbation_gap",
    "steps_bound_efficient",
    "steps_bound_soft_only",
    "transfer_strategy",
]
