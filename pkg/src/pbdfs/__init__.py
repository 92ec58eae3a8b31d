"""Probabilistic branching with guided depth-first search for binary MIPs."""
from .features import instance_features
from .generators import generate
from .linkage import build_linkage_graph, normalized_laplacian
from .lp import lp_relax
from .mip import MipInstance, check_feasible, make_instance, objective_value, read_instance, write_instance
from .predictor import TrainConfig, average_precision, cross_entropy, predict, train
from .search import Termination, baseline_dfs, lp_rounding, pb_dfs, solve_exact

__version__ = "0.1.0"

__all__ = [
    "MipInstance", "make_instance", "check_feasible", "objective_value", "read_instance", "write_instance",
    "lp_relax", "generate", "build_linkage_graph", "normalized_laplacian", "instance_features",
    "TrainConfig", "train", "predict", "cross_entropy", "average_precision",
    "Termination", "pb_dfs", "baseline_dfs", "solve_exact", "lp_rounding",
]
