"""Tree-constrained graph generation toolkit.

Projects unconstrained edge probabilities onto minimum spanning trees inside
a differentiable training loop via selective feature suppression, with a
synthetic branching-pattern dataset generator and graph evaluation metrics.
"""

from .graph import EdgeDelta, GraphError, SpatialGraph, edge_delta, is_tree, load_graph, save_graph
from .lsystem import LSystemSpec, generate_dataset, interpret, resample_nodes, rewrite
from .metrics import MetricsReport, evaluate_dataset, sample_edge_points, smd, topo_score, tree_rate
from .mst import EdgeProbabilities, project, project_mst, threshold_edges
from .scorer import ScorerModel, TrainConfig, edge_loss, infer, pair_features, score_edges, train
from .sfs import EdgeLogits, SfsConfig, classify_case, sfs_backward, sfs_forward, softmax2

__all__ = [
    "EdgeDelta", "GraphError", "SpatialGraph", "edge_delta", "is_tree",
    "load_graph", "save_graph",
    "LSystemSpec", "generate_dataset", "interpret", "resample_nodes", "rewrite",
    "MetricsReport", "evaluate_dataset", "sample_edge_points", "smd",
    "topo_score", "tree_rate",
    "EdgeProbabilities", "project", "project_mst", "threshold_edges",
    "ScorerModel", "TrainConfig", "edge_loss", "infer", "pair_features",
    "score_edges", "train",
    "EdgeLogits", "SfsConfig", "classify_case", "sfs_backward", "sfs_forward",
    "softmax2",
]

__version__ = "0.1.0"
