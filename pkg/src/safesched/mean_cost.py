"""Average-cost optimisation and evaluation on the game viewed as an MDP.

Costs are paid on TaskGen edges, so one Scheduler step plus one TaskGen
step is one unit of time; gains are reported per CPU tick.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .mdp import IDLE, ExplicitMdp, action_sort_key
from .safety import SafeRegion


class EmptyPrefix(ValueError):
    pass


class NoConvergence(RuntimeError):
    def __init__(self, max_iter: int, span: float):
        super().__init__(f"no convergence after {max_iter} iterations (span {span:.3g})")
        self.max_iter = max_iter
        self.span = span


class NonTotalStrategy(ValueError):
    pass


def mean_cost_prefix(costs: Sequence) -> Fraction:
    if len(costs) == 0:
        raise EmptyPrefix("empty prefix")
    return sum((Fraction(c) for c in costs), Fraction(0)) / len(costs)


def discounted_sum(costs: Sequence[float], d: float) -> float:
    if not 0 < d < 1:
        raise ValueError("discount must be in (0, 1)")
    c = np.asarray(costs, dtype=float)
    return float(np.dot(c, d ** np.arange(len(c))))


@dataclass
class CompiledMdp:
    """Scheduler-level view: one row per (Scheduler vertex, action) pair.

    ``P[k]`` is the distribution over Scheduler vertices (by local index)
    after the TaskGen move that follows pair ``k``; ``cost[k]`` its expected
    cost. Pairs of state ``s`` occupy ``start[s]:start[s+1]``.
    """

    states: list[int]
    index: dict[int, int]
    actions: list[int]
    start: np.ndarray
    P: sp.csr_matrix
    cost: np.ndarray

    @property
    def n(self) -> int:
        return len(self.states)

    def pairs(self, s: int) -> range:
        return range(self.start[s], self.start[s + 1])


def _allowed(src, v: int) -> tuple[int, ...]:
    if isinstance(src, SafeRegion):
        return src.safe[v]
    return src.sem.actions(v)


def compile_mdp(src: SafeRegion | ExplicitMdp) -> CompiledMdp:
    m = src.mdp if isinstance(src, SafeRegion) else src
    sem = m.sem
    verts = src.vertices if isinstance(src, SafeRegion) else range(m.n)
    states = [v for v in verts if sem.is_scheduler(v)]
    index = {v: i for i, v in enumerate(states)}
    actions: list[int] = []
    start = [0]
    rows, cols, vals, cost = [], [], [], []
    k = 0
    for v in states:
        ok = _allowed(src, v)
        for a, w in sem.scheduler_edges(v):
            if a not in ok:
                continue
            if sem.is_bottom(v):
                rows.append(k)
                cols.append(index[v])
                vals.append(1.0)
                cost.append(0.0)
            else:
                row = sem.taskgen(w)
                c = Fraction(0)
                for p, cc, u in zip(row.probs, row.costs, row.succs):
                    rows.append(k)
                    cols.append(index[u])
                    vals.append(float(p))
                    c += p * cc
                cost.append(float(c))
            actions.append(a)
            k += 1
        start.append(k)
    P = sp.csr_matrix((vals, (rows, cols)), shape=(k, len(states)))
    P.sum_duplicates()
    return CompiledMdp(states, index, actions, np.asarray(start), P, np.asarray(cost))


def _row_min(q: np.ndarray, start: np.ndarray) -> np.ndarray:
    return np.minimum.reduceat(q, start[:-1])


@dataclass(frozen=True)
class ValueReport:
    gain: float
    bias: dict[int, float]
    strategy: dict[int, int]
    iterations: int
    residual_span: float


def _greedy(cm: CompiledMdp, q: np.ndarray, tie: float) -> dict[int, int]:
    out = {}
    for s, v in enumerate(cm.states):
        ks = cm.pairs(s)
        best = min(q[k] for k in ks)
        cands = [cm.actions[k] for k in ks if q[k] <= best + tie]
        out[v] = min(cands, key=action_sort_key)
    return out


def optimize_mean_cost(
    region: SafeRegion | ExplicitMdp,
    tol: float = 1e-8,
    max_iter: int = 1_000_000,
    tau: float = 0.5,
) -> ValueReport:
    """Relative value iteration with an aperiodicity transform.

    Iterates ``h <- (1-tau) h + tau T h`` normalised at the initial vertex,
    which has the same optimal strategies and gain ``tau * g``; this makes
    periodic chains (Example 1 has period 3) converge. Stops when the span
    of successive differences, rescaled to per-tick units, drops below ``tol``.
    """
    cm = compile_mdp(region)
    ref = cm.index[region.init]
    h = np.zeros(cm.n)
    span = float("inf")
    for it in range(1, max_iter + 1):
        q = cm.cost + cm.P @ h
        th = (1 - tau) * h + tau * _row_min(q, cm.start)
        diff = th - h
        lo, hi = float(diff.min()), float(diff.max())
        span = (hi - lo) / tau
        h = th - th[ref]
        if span < tol:
            gain = (lo + hi) / 2 / tau
            q = cm.cost + cm.P @ h
            strat = _greedy(cm, q, max(10 * tol, 1e-9))
            bias = {v: float(h[i]) for i, v in enumerate(cm.states)}
            gain = 0.0 if gain < tol else gain
            return ValueReport(gain, bias, strat, it, span)
    raise NoConvergence(max_iter, span)


def optimize_discounted(region: SafeRegion | ExplicitMdp, d: float, tol: float = 1e-10, max_iter: int = 10_000_000) -> tuple[float, dict[int, int]]:
    """Optimal expected discounted cost (discount per tick) from the initial vertex."""
    cm = compile_mdp(region)
    v = np.zeros(cm.n)
    for _ in range(max_iter):
        q = cm.cost + d * (cm.P @ v)
        nv = _row_min(q, cm.start)
        if np.max(np.abs(nv - v)) < tol * (1 - d):
            v = nv
            break
        v = nv
    else:
        raise NoConvergence(max_iter, float(np.max(np.abs(nv - v))))
    q = cm.cost + d * (cm.P @ v)
    return float(v[cm.index[region.init]]), _greedy(cm, q, 1e-12)


def _chain(src: SafeRegion | ExplicitMdp, sigma: Mapping[int, int]):
    """Induced Markov chain on Scheduler vertices reachable from the initial one."""
    m = src.mdp if isinstance(src, SafeRegion) else src
    sem = m.sem
    order = [m.init]
    index = {m.init: 0}
    rows, cols, vals, cost = [], [], [], []
    queue = deque([m.init])
    while queue:
        v = queue.popleft()
        i = index[v]
        if sem.is_bottom(v):
            rows.append(i)
            cols.append(i)
            vals.append(1.0)
            cost.append(0.0)
            continue
        a = sigma.get(v)
        if a is None:
            raise NonTotalStrategy(f"no action for reachable vertex {v}")
        w = sem.post(v, a)
        row = sem.taskgen(w)
        c = Fraction(0)
        for p, cc, u in zip(row.probs, row.costs, row.succs):
            if u not in index:
                index[u] = len(order)
                order.append(u)
                queue.append(u)
            rows.append(i)
            cols.append(index[u])
            vals.append(float(p))
            c += p * cc
        cost.append(float(c))
    n = len(order)
    P = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    P.sum_duplicates()
    return order, P, np.asarray(cost)


def stationary_distribution(P: sp.csr_matrix, power_iters: int = 100_000, tol: float = 1e-13) -> np.ndarray:
    """Stationary distribution of a unichain; linear solve, power iteration as fallback."""
    n = P.shape[0]
    if n == 1:
        return np.ones(1)
    A = (P.T - sp.identity(n, format="csr")).tolil()
    A[n - 1, :] = np.ones(n)
    b = np.zeros(n)
    b[n - 1] = 1.0
    pi = None
    try:
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("error")
            pi = spsolve(A.tocsc(), b)
        if not np.all(np.isfinite(pi)) or np.any(pi < -1e-9) or abs(pi.sum() - 1) > 1e-9:
            pi = None
    except Exception:
        pi = None
    if pi is None:
        # Cesaro-averaged power iteration copes with periodic chains
        x = np.full(n, 1.0 / n)
        acc = np.zeros(n)
        PT = P.T.tocsr()
        for k in range(1, power_iters + 1):
            x = PT @ x
            acc += x
            if k % 1000 == 0:
                y = acc / k
                if np.abs(PT @ y - y).max() < tol * 100:
                    break
        pi = acc / k
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def evaluate_strategy(src: SafeRegion | ExplicitMdp, sigma: Mapping[int, int]) -> float:
    """Long-run expected cost per tick of the memoryless strategy ``sigma``."""
    _, P, cost = _chain(src, sigma)
    pi = stationary_distribution(P)
    return float(pi @ cost)


def strategy_to_json(sigma: Mapping[int, int]) -> dict[str, str]:
    return {str(v): ("eps" if a == IDLE else str(a)) for v, a in sorted(sigma.items())}


def strategy_from_json(obj: Mapping[str, str]) -> dict[int, int]:
    return {int(v): (IDLE if a == "eps" else int(a)) for v, a in obj.items()}
