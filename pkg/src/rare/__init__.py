"""Robust masked graph autoencoder pre-training on desk-scale graphs."""

from .estimator import KNNGraph, RAREEmbedder, check_graph
from .evaluation import LinearProbe, linear_probe, make_adversarial, pool_graph, robustness_run
from .exceptions import ConfigError, DimensionError, GraphFormatError, NumericalError
from .graph import GraphDataset, SparseGraph, generate_sbm, knn_graph, load_graph, save_graph
from .model import RareConfig, RareModel, TrainReport, embed, pretrain

__all__ = [
    "KNNGraph", "RAREEmbedder", "check_graph", "LinearProbe", "linear_probe", "make_adversarial",
    "pool_graph", "robustness_run", "ConfigError", "DimensionError", "GraphFormatError",
    "NumericalError", "GraphDataset", "SparseGraph", "generate_sbm", "knn_graph", "load_graph",
    "save_graph", "RareConfig", "RareModel", "TrainReport", "embed", "pretrain",
]

__version__ = "0.1.0"
