"""Learning error against execution length for a four-task soft system.

The soft-only learner is cut off at increasing step budgets; the largest
pointwise error of the learned distributions drops as more of the
executed schedule is observed.

    python3 demos/03_learning_curve.py
"""

from statistics import mean

from safesched.fixtures import load_fixture
from safesched.pac import LearnConfig, learn_soft_only, steps_bound_soft_only
from safesched.sim import SimEnv
from safesched.task_model import max_deviation

sys = load_fixture("4S")
print("step bound at eps=0.1, gamma=0.1:", steps_bound_soft_only(sys, "0.1", "0.1"))
print(f"{'budget':>8} {'max error':>10}")
for budget in (50, 100, 200, 500, 1000, 2000, 5000, 10_000):
    errs = []
    for seed in range(5):
        cfg = LearnConfig("0.1", "0.1", seed=seed, step_budget=budget)
        model = learn_soft_only(SimEnv(sys, seed, log=False), cfg)
        errs.append(float(max_deviation(sys, model.system)))
    print(f"{budget:>8} {mean(errs):>10.4f}")
