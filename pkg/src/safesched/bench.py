"""Benchmark harness: every (fixture, method, seed) cell is an isolated trial."""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from statistics import mean

from .fixtures import REFERENCE_OPTIMUM, load_fixture
from .mcts import MctsParams, run_mcts_schedule
from .mdp import build_explicit
from .mean_cost import optimize_mean_cost
from .policies import (
    EdfPolicy,
    QPolicy,
    QTable,
    RandomSafePolicy,
    default_penalty,
    edf_shield,
    evaluate_q,
    mgs_shield,
    no_shield,
    run_with_policy,
    train_q,
)
from .safety import safe_region
from .sim import SimEnv, UniformStream

METHODS = ("solve", "mcts-mgs", "mcts-edf", "mcts-unsafe", "q-mgs", "q-edf", "q-unsafe", "edf", "random-safe")


@dataclass
class ExperimentSpec:
    fixtures: list[str]
    methods: list[str] = field(default_factory=lambda: ["solve", "mcts-mgs", "mcts-edf"])
    seeds: list[int] = field(default_factory=lambda: [0])
    eval_steps: int = 600
    train_steps: int = 10_000
    mcts: MctsParams = field(default_factory=lambda: MctsParams(horizon=10, node_budget=30, init_rollouts=3))
    jobs: int = 1


@dataclass
class Row:
    fixture: str
    method: str
    seed: int
    mean_cost: float | None
    violations: int | None
    wall_time: float
    error: str = ""


def _trial(args) -> Row:
    name, method, seed, spec = args
    t0 = time.perf_counter()
    try:
        sys = load_fixture(name)
        if method == "solve":
            gain = optimize_mean_cost(safe_region(build_explicit(sys))).gain
            return Row(name, method, seed, gain, 0, time.perf_counter() - t0)
        if method.startswith("mcts-"):
            advice = {"mcts-mgs": "mgs", "mcts-edf": "edf", "mcts-unsafe": "none"}[method]
            if advice != "none" and not sys.hard:
                raise ValueError("not applicable without hard tasks")
            env = SimEnv(sys, seed, poison=False, log=False)
            params = MctsParams(
                spec.mcts.horizon, spec.mcts.node_budget, spec.mcts.init_rollouts, spec.mcts.uct_c, seed
            )
            rep = run_mcts_schedule(env, advice, params, spec.eval_steps)
            return Row(name, method, seed, rep.mean_cost, rep.safety_violations, time.perf_counter() - t0)
        m = build_explicit(sys)
        env = SimEnv(sys, seed, sem=m.sem, poison=False, log=False)
        rng = UniformStream(seed + 1_000_003)
        if method.startswith("q-"):
            kind = method[2:]
            if kind != "unsafe" and not sys.hard:
                raise ValueError("not applicable without hard tasks")
            shield = {"mgs": lambda: mgs_shield(safe_region(m)), "edf": lambda: edf_shield(m.sem),
                      "unsafe": lambda: no_shield(m.sem)}[kind]()
            pol = QPolicy(QTable(), shield, rng, penalty=default_penalty(sys) if kind == "unsafe" else 0.0)
            tr = train_q(env, pol, spec.train_steps)
            ev = evaluate_q(env, pol, spec.eval_steps)
            return Row(name, method, seed, ev.mean_cost, tr.hard_misses + ev.hard_misses, time.perf_counter() - t0)
        if method == "edf":
            st = run_with_policy(env, EdfPolicy(m.sem), no_shield(m.sem), spec.eval_steps)
        elif method == "random-safe":
            st = run_with_policy(env, RandomSafePolicy(rng), mgs_shield(safe_region(m)), spec.eval_steps)
        else:
            raise ValueError(f"unknown method {method!r}")
        return Row(name, method, seed, st.mean_cost, st.hard_misses, time.perf_counter() - t0)
    except Exception as e:  # recorded, the run continues
        return Row(name, method, seed, None, None, time.perf_counter() - t0, f"{type(e).__name__}: {e}")


def run_benchmark(spec: ExperimentSpec) -> list[Row]:
    cells = [(f, mth, s, spec) for f in spec.fixtures for mth in spec.methods for s in spec.seeds]
    if spec.jobs > 1:
        with ProcessPoolExecutor(spec.jobs) as ex:
            rows = list(ex.map(_trial, cells))
    else:
        rows = [_trial(c) for c in cells]
    return sorted(rows, key=lambda r: (r.fixture, r.method, r.seed))


def rows_to_csv(rows: list[Row]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["fixture", "method", "seed", "mean_cost", "violations", "wall_time", "error"])
    for r in rows:
        w.writerow([r.fixture, r.method, r.seed, "" if r.mean_cost is None else f"{r.mean_cost:.6f}",
                    "" if r.violations is None else r.violations, f"{r.wall_time:.3f}", r.error])
    return buf.getvalue()


def summarize(rows: list[Row]) -> str:
    groups: dict[tuple[str, str], list[Row]] = {}
    for r in rows:
        groups.setdefault((r.fixture, r.method), []).append(r)
    lines = ["fixture,method,trials,mean_cost,total_violations,reference_optimum"]
    for (f, mth), rs in sorted(groups.items()):
        ok = [r for r in rs if r.mean_cost is not None]
        mc = f"{mean(r.mean_cost for r in ok):.4f}" if ok else "error"
        viol = sum(r.violations or 0 for r in ok)
        ref = REFERENCE_OPTIMUM.get(f)
        lines.append(f"{f},{mth},{len(rs)},{mc},{viol},{'' if ref is None else ref}")
    return "\n".join(lines) + "\n"
