"""When can soft-task computation times be learned without risking a hard miss?

Example 2 is good for sampling (some arrival phase of the soft task lets
its job run to completion) but not good for efficient sampling (no
vertex keeps that possibility open forever). The learner uses the first
condition and never misses a hard deadline.

    python3 demos/02_sampling_conditions.py
"""

from safesched.fixtures import load_fixture
from safesched.mdp import build_explicit
from safesched.pac import LearnConfig, Mode, learn_safe
from safesched.safety import good_for_efficient_sampling, good_for_sampling, safe_region
from safesched.sim import SimEnv

for name in ("example1", "example2", "simple", "2H1S"):
    region = safe_region(build_explicit(load_fixture(name)))
    gfs = good_for_sampling(region)
    eff = good_for_efficient_sampling(region)
    print(f"{name:9s} good for sampling: {all(v.ok for v in gfs.values())!s:5}  "
          f"efficient: {eff.ok!s:5}  K (ticks): {None if eff.k_edges is None else eff.k_edges // 2}")

sys = load_fixture("example2")
m = build_explicit(sys)
region = safe_region(m)
env = SimEnv(sys, seed=0, sem=m.sem, log=False)
cfg = LearnConfig("0.1", "0.1", seed=0, mode=Mode.GOOD_FOR_SAMPLING)
model = learn_safe(env, region, cfg, sampling=good_for_sampling(region))
print(f"\nlearned Example 2 in {model.steps} ticks, hard misses: {env.hard_misses}")
for (i, kind), n in sorted(model.counts.items()):
    print(f"  task {i} {kind}: {n} samples (target {model.targets[(i, kind)]})")
print("learned soft computation time:", model.system.tasks[1].computation.render())
