"""Independent reference computations used by the tests.

Nothing here shares code with the solvers under test beyond the game
semantics itself: strategies are enumerated exhaustively and each induced
chain is evaluated with a dense multichain linear system.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np


def _step_table(region):
    """vertex -> action -> (expected cost, {successor: prob}) over safe actions."""
    sem = region.mdp.sem
    table = {}
    for v in region.scheduler_vertices:
        per = {}
        for a in region.safe[v]:
            if sem.is_bottom(v):
                per[a] = (0.0, {v: 1.0})
                continue
            row = sem.taskgen(sem.post(v, a))
            dist: dict[int, float] = {}
            c = Fraction(0)
            for p, cc, u in zip(row.probs, row.costs, row.succs):
                dist[u] = dist.get(u, 0.0) + float(p)
                c += p * cc
            per[a] = (float(c), dist)
        table[v] = per
    return table


def enumerate_strategies(region, limit: int = 2_000_000):
    """Yield every memoryless deterministic strategy restricted to the
    vertices it actually reaches from the initial vertex."""
    table = _step_table(region)
    init = region.init
    count = 0

    def rec(assign: dict, reach: set, todo: list):
        nonlocal count
        while todo and todo[-1] in assign:
            todo = todo[:-1]
        if not todo:
            count += 1
            if count > limit:
                raise RuntimeError("too many strategies for exhaustive enumeration")
            yield dict(assign)
            return
        v = todo[-1]
        rest = todo[:-1]
        for a in sorted(table[v]):
            assign[v] = a
            new = [u for u in table[v][a][1] if u not in reach]
            yield from rec(assign, reach | set(new), rest + new)
            del assign[v]

    yield from rec({}, {init}, [init])


def chain_gain(region, sigma) -> float:
    """Expected mean cost from the initial vertex, via the multichain
    evaluation equations (I-P)g = 0, g + (I-P)h = c, h + (I-P)w = 0."""
    table = _step_table(region)
    states = sorted(sigma)
    idx = {v: i for i, v in enumerate(states)}
    n = len(states)
    P = np.zeros((n, n))
    c = np.zeros(n)
    for v in states:
        cost, dist = table[v][sigma[v]]
        c[idx[v]] = cost
        for u, p in dist.items():
            P[idx[v], idx[u]] += p
    I = np.eye(n)
    Z = np.zeros((n, n))
    A = np.block([[I - P, Z, Z], [I, I - P, Z], [Z, I, I - P]])
    b = np.concatenate([np.zeros(n), c, np.zeros(n)])
    sol = np.linalg.lstsq(A, b, rcond=None)[0]
    return float(sol[idx[region.init]])


def brute_force_optimum(region, limit: int = 2_000_000) -> tuple[float, int]:
    best = np.inf
    n = 0
    for sigma in enumerate_strategies(region, limit):
        n += 1
        best = min(best, chain_gain(region, sigma))
    return best, n
