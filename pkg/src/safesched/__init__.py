"""Safe and near-optimal scheduling of hard and soft tasks on one CPU.

Task systems become two-player stochastic games; hard deadlines are
enforced by safety synthesis, soft-deadline misses are minimised in
expected mean-cost, and unknown distributions are learned by observation.
"""

__version__ = "0.1.0"
