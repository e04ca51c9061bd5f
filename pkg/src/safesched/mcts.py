"""Receding-horizon Monte-Carlo tree search with action advice.

At every tick a fresh tree is grown from the current Scheduler vertex of
the model. Scheduler vertices are decision nodes chosen by UCB1 on
normalised cost; TaskGen vertices are chance nodes whose outcome is
sampled with its exact probability. A node entering the tree gets its
value from uniform rollouts over the advised actions. Advice restricts
both selection and rollouts, so with a safe advice the search never
proposes an unsafe action.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .mdp import Semantics, build_explicit
from .policies import edf_shield, no_shield
from .safety import safe_region
from .sim import SimEnv, UniformStream
from .task_model import TaskSystem

Advice = Callable[[int], Sequence[int]]


class NoAllowedAction(RuntimeError):
    pass


class ModelMismatch(RuntimeError):
    """The environment produced an outcome the planning model deems impossible."""


@dataclass(frozen=True)
class MctsParams:
    horizon: int = 30
    node_budget: int = 500
    init_rollouts: int = 100
    uct_c: float = math.sqrt(2)
    seed: int = 0
    penalty: float | None = None  # cost of entering BOTTOM in the model; default 1000 * max soft cost


def make_advice(kind: str, sem: Semantics, max_vertices: int = 1_000_000) -> Advice:
    """``kind`` is one of "mgs", "edf", "none"."""
    if kind == "mgs":
        m = build_explicit(sem.sys, max_vertices=max_vertices)
        region = safe_region(m)
        # the region lives in its own Semantics; re-key by vertex value
        table = {m.sem.vertex(v): acts for v, acts in region.safe.items()}
        cache: dict[int, tuple[int, ...]] = {}

        def mgs(vid: int) -> tuple[int, ...]:
            out = cache.get(vid)
            if out is None:
                out = table.get(sem.vertex(vid))
                if out is None:
                    raise NoAllowedAction(f"vertex {vid} is outside the safe region")
                cache[vid] = out
            return out

        return mgs
    if kind == "edf":
        return edf_shield(sem)
    if kind == "none":
        return no_shield(sem)
    raise ValueError(f"unknown advice {kind!r}")


class _Node:
    __slots__ = ("visits", "n", "q")

    def __init__(self):
        self.visits = 0
        self.n: dict[int, int] = {}
        self.q: dict[int, float] = {}


class Mcts:
    def __init__(self, sem: Semantics, advice: Advice, params: MctsParams = MctsParams(), audit: list | None = None):
        self.sem = sem
        self.advice = advice
        self.params = params
        self.rng = UniformStream(params.seed)
        pen = params.penalty
        self.penalty = 1000.0 * float(sem.sys.max_cost or 1) if pen is None else pen
        self.audit = audit
        self._cost_scale = max(float(sem.sys.max_cost), 1e-9)

    def _allowed(self, vid: int) -> Sequence[int]:
        acts = self.advice(vid)
        if not acts:
            raise NoAllowedAction(f"advice is empty at vertex {vid}")
        return acts

    def _record(self, vid, a, acts):
        if self.audit is not None:
            self.audit.append((vid, a, tuple(acts)))

    def _transition(self, vid: int, a: int) -> tuple[float, int]:
        # a hard miss is charged the penalty and the episode restarts,
        # mirroring what the environment does, so dying early never looks cheap
        sem = self.sem
        row = sem.taskgen(sem.post(vid, a))
        k = row.sample(self.rng.next())
        nxt = row.succs[k]
        if sem.is_bottom(nxt):
            return float(row.costs[k]) + self.penalty, sem.init
        return float(row.costs[k]), nxt

    def rollout(self, vid: int, steps: int) -> float:
        total = 0.0
        for _ in range(steps):
            acts = self._allowed(vid)
            a = acts[self.rng.integers(len(acts))]
            self._record(vid, a, acts)
            c, vid = self._transition(vid, a)
            total += c
        return total

    def _select(self, node: _Node, acts: Sequence[int], remaining: int) -> int:
        for a in acts:
            if a not in node.n:
                return a
        scale = self._cost_scale * remaining
        log_n = math.log(max(node.visits, 1))
        best, best_score = acts[0], math.inf
        for a in acts:
            score = node.q[a] / scale - self.params.uct_c * math.sqrt(log_n / node.n[a])
            if score < best_score:
                best, best_score = a, score
        return best

    def decide(self, root: int) -> int:
        p = self.params
        sem = self.sem
        if not sem.is_scheduler(root) or sem.is_bottom(root):
            raise NoAllowedAction("decisions are only taken at Scheduler vertices")
        tree: dict[tuple[int, int], _Node] = {}
        root_acts = self._allowed(root)
        for _ in range(max(p.node_budget, 1)):
            path: list[tuple[_Node, int, float]] = []
            vid, depth = root, 0
            leaf = 0.0
            while depth < p.horizon:
                key = (depth, vid)
                node = tree.get(key)
                fresh = node is None
                if fresh:
                    node = tree[key] = _Node()
                acts = self._allowed(vid)
                if fresh and depth > 0:
                    runs = max(p.init_rollouts, 1)
                    leaf = sum(self.rollout(vid, p.horizon - depth) for _ in range(runs)) / runs
                    break
                a = self._select(node, acts, p.horizon - depth)
                self._record(vid, a, acts)
                c, vid = self._transition(vid, a)
                path.append((node, a, c))
                depth += 1
            g = leaf
            for node, a, c in reversed(path):
                g += c
                node.visits += 1
                n = node.n.get(a, 0) + 1
                node.n[a] = n
                node.q[a] = node.q.get(a, 0.0) + (g - node.q.get(a, 0.0)) / n
        rootn = tree.get((0, root))
        tried = [a for a in root_acts if rootn is not None and a in rootn.n]
        if not tried:
            return root_acts[0]
        return min(tried, key=lambda a: (rootn.q[a], rootn.n[a], root_acts.index(a)))


def mcts_decide(sem: Semantics, vid: int, advice: Advice, params: MctsParams = MctsParams()) -> int:
    return Mcts(sem, advice, params).decide(vid)


@dataclass
class ScheduleReport:
    mean_cost: float
    safety_violations: int
    steps: int
    actions: list[int] = field(default_factory=list)


def run_mcts_schedule(
    env: SimEnv,
    advice_kind: str = "mgs",
    params: MctsParams = MctsParams(),
    eval_steps: int = 600,
    model: TaskSystem | None = None,
    audit: list | None = None,
) -> ScheduleReport:
    """Plan with MCTS on ``model`` (default: the env's own system) and act in ``env``.

    The planner only sees outcome labels; it tracks its own model vertex.
    After a hard miss the episode restarts from the initial vertex.
    """
    model_sem = env.sem if model is None else Semantics(model, env.sem.late_miss_detection)
    advice = make_advice(advice_kind, model_sem)
    planner = Mcts(model_sem, advice, params, audit=audit)
    mv = model_sem.init
    cost = 0.0
    violations = 0
    actions = []
    for _ in range(eval_steps):
        a = planner.decide(mv)
        actions.append(a)
        obs = env.step(a)
        cost += float(obs.cost)
        if obs.hard_miss:
            violations += 1
            env.reset()
            mv = model_sem.init
            continue
        try:
            mv, _ = model_sem.follow(mv, a, obs.labels)
        except Exception as e:
            raise ModelMismatch(str(e)) from e
    return ScheduleReport(cost / eval_steps, violations, eval_steps, actions)
