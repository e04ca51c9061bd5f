"""How precise must a learned model be for its optimal strategy to stay
near-optimal on the real system?

Computes the precision required for a mean-cost loss of at most beta on
Example 1, learns a model at that precision, solves it, and evaluates the
resulting strategy on the true game.

    python3 demos/04_robustness.py
"""

from safesched.fixtures import load_fixture
from safesched.mdp import build_explicit
from safesched.mean_cost import evaluate_strategy, optimize_mean_cost
from safesched.pac import LearnConfig, eps_for_robustness, eta_from_eps, learn_iid, perturbation_gap, transfer_strategy
from safesched.safety import safe_region
from safesched.task_model import max_deviation

sys = load_fixture("example1")
m = build_explicit(sys)
region = safe_region(m)
n_sched, pi_min = len(region.scheduler_vertices), region.pi_min_edge()
beta = 0.5
eps = eps_for_robustness(beta, pi_min, n_sched)
print(f"|V_sched| = {n_sched}, smallest edge probability = {pi_min}")
print(f"required precision for beta={beta}: eps = {float(eps):.6g}")
print(f"edge-probability perturbation at that eps (whole system): {float(eta_from_eps(sys, eps)):.3g}")

truth = optimize_mean_cost(region).gain
print(f"true optimum: {truth:.6f}")
for seed in range(5):
    model = learn_iid(sys, LearnConfig(eps, "0.1", seed=seed))
    m_hat = build_explicit(model.system)
    sigma = optimize_mean_cost(safe_region(m_hat)).strategy
    value = evaluate_strategy(m, transfer_strategy(m_hat.sem, sigma, m.sem))
    print(f"  seed {seed}: model error {float(max_deviation(sys, model.system)):.2e}, "
          f"strategy value on the true game {value:.6f}")
print("gap formula at eta = 5e-5, pi_min = 0.4, |V| = 100:", round(perturbation_gap(100, 5e-5, 0.4), 6))
