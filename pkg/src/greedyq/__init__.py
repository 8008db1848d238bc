"""Learned greedy construction heuristics for graph optimization.

The package trains a graph-embedding value network with n-step fitted
Q-learning to build solutions for minimum vertex cover, maximum cut,
the Euclidean traveling salesman problem and set cover, one node at a
time.  Classical heuristics and small-instance exact solvers are
included for calibration, and a reproducible experiment harness ties
everything together (also reachable as the ``greedyq`` command).
"""

from .errors import (ArgumentError, GreedyQError, InfeasibleError, ParseError,
                     SizeLimitError, TrainingError)
from .graphs import PointSet, WeightedGraph
from .problems import Problem

__version__ = "0.1.0"

__all__ = [
    "ArgumentError", "GreedyQError", "InfeasibleError", "ParseError",
    "SizeLimitError", "TrainingError", "PointSet", "WeightedGraph",
    "Problem", "__version__",
]
