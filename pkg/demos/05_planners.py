"""Comparing planners on the desk-scale fixtures.

Exact solving, receding-horizon MCTS with safe (MGS) or EDF advice, and
tabular Q-learning with and without a shield. Unshielded Q-learning is the
only method that misses hard deadlines.

    python3 demos/05_planners.py
"""

from safesched.bench import ExperimentSpec, run_benchmark, summarize
from safesched.mcts import MctsParams

spec = ExperimentSpec(
    fixtures=["simple", "1H2S", "2H1S"],
    methods=["solve", "mcts-mgs", "mcts-edf", "q-mgs", "q-edf", "q-unsafe", "edf"],
    seeds=[0, 1, 2],
    eval_steps=600,
    train_steps=10_000,
    mcts=MctsParams(horizon=8, node_budget=16, init_rollouts=2),
)
print(summarize(run_benchmark(spec)))
