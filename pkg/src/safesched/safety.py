"""Safety games on the explicit MDP: attractors, the safe region and the
most general safe scheduler, plus the two sampling-condition deciders used
by the safe learners.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .mdp import FIN, KILL, SUB, ExplicitMdp, action_name
from .task_model import TaskSystem


class Unschedulable(Exception):
    """The initial vertex cannot avoid a hard deadline miss."""


@dataclass
class GameGraph:
    """Plain two-player graph: successor lists and a Scheduler-ownership flag."""

    succ: list[list[int]]
    scheduler: list[bool]

    @property
    def n(self) -> int:
        return len(self.succ)

    def predecessors(self) -> list[list[int]]:
        pred: list[list[int]] = [[] for _ in range(self.n)]
        for v, ws in enumerate(self.succ):
            for w in set(ws):
                pred[w].append(v)
        return pred


def game_graph(m: ExplicitMdp, allowed: Mapping[int, Sequence[int]] | None = None) -> GameGraph:
    """Graph view of ``m``; ``allowed`` optionally restricts Scheduler actions."""
    sem = m.sem
    succ = []
    sched = []
    for v in range(m.n):
        if sem.is_scheduler(v):
            edges = sem.scheduler_edges(v)
            if allowed is not None and v in allowed:
                ok = set(allowed[v])
                edges = [(a, w) for a, w in edges if a in ok]
            succ.append([w for _, w in edges])
            sched.append(True)
        else:
            succ.append(list(sem.taskgen(v).succs))
            sched.append(False)
    return GameGraph(succ, sched)


def attractor(g: GameGraph | ExplicitMdp, bad: Iterable[int]) -> dict[int, int]:
    """Vertices from which Scheduler cannot avoid ``bad``, with inclusion ranks.

    Rank 0 is ``bad`` itself; a vertex has rank k+1 when it is added by the
    k-th application of the one-step predecessor operator (Scheduler: all
    successors already in; TaskGen: some successor already in).
    """
    if isinstance(g, ExplicitMdp):
        g = game_graph(g)
    pred = g.predecessors()
    remaining = [len(set(ws)) for ws in g.succ]
    rank: dict[int, int] = {}
    frontier = []
    for b in bad:
        if b not in rank:
            rank[b] = 0
            frontier.append(b)
    level = 0
    while frontier:
        nxt = []
        for w in frontier:
            for v in pred[w]:
                if v in rank:
                    continue
                if g.scheduler[v]:
                    remaining[v] -= 1
                    if remaining[v] == 0:
                        rank[v] = level + 1
                        nxt.append(v)
                else:
                    rank[v] = level + 1
                    nxt.append(v)
        frontier = nxt
        level += 1
    return rank


def is_strongly_connected(succ: Sequence[Sequence[int]], nodes: Sequence[int] | None = None) -> bool:
    """Strong connectivity of the subgraph induced by ``nodes`` (default: all)."""
    if nodes is None:
        nodes = range(len(succ))
    nodes = list(nodes)
    if not nodes:
        return False
    idx = {v: i for i, v in enumerate(nodes)}
    rows, cols = [], []
    for v in nodes:
        for w in succ[v]:
            j = idx.get(w)
            if j is not None:
                rows.append(idx[v])
                cols.append(j)
    n = len(nodes)
    adj = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    ncomp, _ = connected_components(adj, directed=True, connection="strong")
    return ncomp == 1


@dataclass
class SafeRegion:
    """The game restricted to safe vertices and safe Scheduler edges,
    pruned to what is reachable from the initial vertex."""

    mdp: ExplicitMdp
    vertices: list[int]
    safe: dict[int, tuple[int, ...]]
    unsafe_rank: dict[int, int] = field(repr=False)

    @property
    def sys(self) -> TaskSystem:
        return self.mdp.sys

    @property
    def init(self) -> int:
        return self.mdp.init

    @property
    def scheduler_vertices(self) -> list[int]:
        return [v for v in self.vertices if v in self.safe]

    def contains(self, v: int) -> bool:
        return v in self._members

    def __post_init__(self):
        self._members = set(self.vertices)

    def successors(self, v: int) -> list[int]:
        sem = self.mdp.sem
        if v in self.safe:
            ok = self.safe[v]
            return [w for a, w in sem.scheduler_edges(v) if a in ok]
        return list(sem.taskgen(v).succs)

    def graph(self) -> GameGraph:
        """Game graph on the full id range with non-region vertices left isolated."""
        n = self.mdp.n
        succ: list[list[int]] = [[] for _ in range(n)]
        sched = [self.mdp.sem.is_scheduler(v) for v in range(n)]
        for v in self.vertices:
            succ[v] = self.successors(v)
        return GameGraph(succ, sched)

    def pi_min_edge(self) -> Fraction:
        """Smallest probability on a TaskGen edge of the region."""
        sem = self.mdp.sem
        return (min(min(sem.taskgen(v).probs) for v in self.vertices if v not in self.safe))

    def pi_min_task(self) -> Fraction:
        """Smallest probability in any task's computation or arrival distribution."""
        return min(p for t in self.mdp.sys.tasks for d in (t.computation, t.arrival) for _, p in d.items())


def safe_region(m: ExplicitMdp) -> SafeRegion:
    sem = m.sem
    bad = [] if m.bottom is None else [m.bottom]
    attr = attractor(m, bad)
    if m.init in attr:
        raise Unschedulable("initial vertex is in the attractor of BOTTOM")
    safe: dict[int, tuple[int, ...]] = {}
    seen = {m.init}
    queue = deque([m.init])
    order = []
    while queue:
        v = queue.popleft()
        order.append(v)
        if sem.is_scheduler(v):
            edges = [(a, w) for a, w in sem.scheduler_edges(v) if w not in attr]
            safe[v] = tuple(a for a, _ in edges)
            nxt = [w for _, w in edges]
        else:
            nxt = sem.taskgen(v).succs
        for w in nxt:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return SafeRegion(m, sorted(order), safe, attr)


def mgs(region: SafeRegion) -> dict[int, tuple[int, ...]]:
    """Most general safe scheduler: every safe action at every region vertex."""
    return dict(region.safe)


def check_single_mec(region: SafeRegion | GameGraph) -> bool:
    """The region is one end component iff its graph is strongly connected."""
    if isinstance(region, GameGraph):
        return is_strongly_connected(region.succ)
    succ = region.graph().succ
    return is_strongly_connected(succ, region.vertices)


# -- sampling conditions ------------------------------------------------------


@dataclass
class SamplingVerdict:
    task: int
    ok: bool
    witnesses: list[int]  # V_i: job-entry vertices from which completion is forced
    strategy: dict[int, int]  # sigma_i on the winning Scheduler vertices


def _entry_vertices(region: SafeRegion, i: int) -> set[int]:
    sem = region.mdp.sem
    out = set()
    for v in region.vertices:
        if v in region.safe:
            continue
        row = sem.taskgen(v)
        for lab, w in zip(row.labels, row.succs):
            if lab[i] in (SUB, KILL):
                out.add(w)
    return out


def completion_game(region: SafeRegion, i: int) -> dict[int, int]:
    """Region vertices from which Scheduler can force the live job of task
    ``i`` to complete before it is killed. Returns vertex -> rank.

    A TaskGen outcome labelled fin/sub for ``i`` is an immediate win, one
    labelled killANDsub an immediate loss; Scheduler only uses safe actions.
    """
    sem = region.mdp.sem
    win: dict[int, int] = {}
    pending: dict[int, int] = {}
    pred: dict[int, list[int]] = {}
    frontier = []
    for v in region.vertices:
        if v in region.safe:
            for a, w in sem.scheduler_edges(v):
                if a in region.safe[v]:
                    pred.setdefault(w, []).append(v)
            continue
        row = sem.taskgen(v)
        if any(lab[i] == KILL for lab in row.labels):
            continue
        open_succ = {w for lab, w in zip(row.labels, row.succs) if lab[i] not in (FIN, SUB)}
        for w in open_succ:
            pred.setdefault(w, []).append(v)
        if not open_succ:
            win[v] = 0
            frontier.append(v)
        else:
            pending[v] = len(open_succ)
    level = 0
    while frontier:
        nxt = []
        for w in frontier:
            for v in pred.get(w, ()):
                if v in win:
                    continue
                if v in region.safe:
                    win[v] = level + 1
                    nxt.append(v)
                elif v in pending:
                    pending[v] -= 1
                    if pending[v] == 0:
                        win[v] = level + 1
                        nxt.append(v)
        frontier = nxt
        level += 1
    return win


def _greedy_strategy(region: SafeRegion, ranks: Mapping[int, int], verts: Iterable[int]) -> dict[int, int]:
    sem = region.mdp.sem
    out = {}
    for v in verts:
        if v not in region.safe:
            continue
        best = None
        for a, w in sem.scheduler_edges(v):
            if a in region.safe[v] and w in ranks and (best is None or ranks[w] < best[0]):
                best = (ranks[w], a)
        if best is not None:
            out[v] = best[1]
    return out


def good_for_sampling(region: SafeRegion) -> dict[int, SamplingVerdict]:
    """Per soft task: the entry vertices from which the new job can be
    driven to completion while staying safe."""
    out = {}
    for i in region.sys.soft:
        win = completion_game(region, i)
        entries = sorted(_entry_vertices(region, i) & set(win))
        out[i] = SamplingVerdict(i, bool(entries), entries, _greedy_strategy(region, win, win))
    return out


@dataclass
class EfficientVerdict:
    task: int
    ok: bool
    safe_set: list[int]  # Safe_i, Scheduler vertices
    k_edges: int | None  # worst-case game edges to reach Safe_i, None if unreachable
    keep_safe: dict[int, int]  # sigma_i inside Safe_i
    reach: dict[int, int]  # attractor strategy towards Safe_i

    @property
    def k_ticks(self) -> int | None:
        return None if self.k_edges is None else self.k_edges // 2


@dataclass
class EfficientReport:
    ok: bool
    k_edges: int | None
    per_task: dict[int, EfficientVerdict]


def _kill_attractor(region: SafeRegion, i: int) -> dict[int, int]:
    g = region.graph()
    sem = region.mdp.sem
    bad = [
        v
        for v in region.vertices
        if v not in region.safe and any(lab[i] == KILL for lab in sem.taskgen(v).labels)
    ]
    return attractor(g, bad)


def good_for_efficient_sampling(region: SafeRegion) -> EfficientReport:
    g = region.graph()
    sched = region.scheduler_vertices
    per: dict[int, EfficientVerdict] = {}
    for i in region.sys.soft:
        lose = _kill_attractor(region, i)
        safe_i = [v for v in sched if v not in lose]
        if not safe_i:
            per[i] = EfficientVerdict(i, False, [], None, {}, {})
            continue
        keep = {}
        sem = region.mdp.sem
        for v in safe_i:
            for a, w in sem.scheduler_edges(v):
                if a in region.safe[v] and w not in lose:
                    keep[v] = a
                    break
        # sure reachability of Safe_i inside the region: attractor for Scheduler
        # is the dual game, so flip ownership
        flipped = GameGraph(g.succ, [not s for s in g.scheduler])
        isolated = set(range(region.mdp.n)) - set(region.vertices)
        reach_rank = {v: r for v, r in attractor(flipped, safe_i).items() if v not in isolated}
        missing = [v for v in sched if v not in reach_rank]
        k = None if missing else max(reach_rank[v] for v in sched)
        per[i] = EfficientVerdict(
            i, not missing, safe_i, k, keep, _greedy_strategy(region, reach_rank, sched)
        )
    ok = all(v.ok for v in per.values())
    k = max((v.k_edges for v in per.values() if v.k_edges is not None), default=0) if ok else None
    return EfficientReport(ok, k, per)


def describe_safe_sets(region: SafeRegion) -> dict[str, list[str]]:
    sem = region.mdp.sem
    return {str(v): [action_name(a) for a in region.safe[v]] for v in region.scheduler_vertices}
