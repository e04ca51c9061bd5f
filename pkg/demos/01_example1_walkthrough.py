"""Example 1 end to end: one hard task, one soft task with miss cost 10.

Builds the game, shows the first moves from the initial vertex, computes
the safe region, solves for the optimal mean cost and checks it by
simulation against a scheduler that never runs the soft task.

    python3 demos/01_example1_walkthrough.py
"""

from safesched.fixtures import load_fixture
from safesched.mdp import action_name, build_explicit
from safesched.mean_cost import evaluate_strategy, optimize_mean_cost
from safesched.policies import StrategyPolicy, EdfPolicy, no_shield, run_with_policy
from safesched.safety import mgs, safe_region
from safesched.sim import SimEnv, never_schedule, run_policy

sys = load_fixture("example1")
m = build_explicit(sys)
sem = m.sem
print(f"explicit game: {m.n} vertices, {m.num_edges()} edges")

init = sem.init
print("\nfrom the initial vertex", sem.vertex(init).render())
for a, w in sem.scheduler_edges(init):
    row = sem.taskgen(w)
    outs = ", ".join(f"{'/'.join(lab)} p={p}" for lab, p in zip(row.labels, row.probs))
    print(f"  {action_name(a):>3} -> {sem.vertex(w).render()}  [{outs}]")

region = safe_region(m)
print(f"\nsafe region: {len(region.vertices)} vertices, {len(region.scheduler_vertices)} of them Scheduler-owned")
print("safe actions at the initial vertex:", [action_name(a) for a in mgs(region)[init]])

rep = optimize_mean_cost(region)
print(f"\noptimal expected mean cost: {rep.gain:.6f} (after {rep.iterations} iterations)")
print("optimal first move:", action_name(rep.strategy[init]))

never = {v: (0 if 0 in sem.actions(v) else -1) for v in m.scheduler_ids()}
print(f"never running the soft task costs {evaluate_strategy(m, never):.6f} per tick")

env = run_policy(SimEnv(sys, seed=1, log=False), never_schedule(1), 3000)
print(f"  simulated over 3000 ticks: {env.mean_cost():.4f}")

env = SimEnv(sys, seed=1, sem=sem, log=False)
stats = run_with_policy(env, StrategyPolicy(rep.strategy, EdfPolicy(sem)), no_shield(sem), 3000)
print(f"optimal strategy simulated over 3000 ticks: {stats.mean_cost:.4f}, hard misses {stats.hard_misses}")
