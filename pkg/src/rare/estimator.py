"""scikit-learn compatible wrappers.

``RAREEmbedder`` pre-trains on a graph in ``fit`` and returns backbone
embeddings from ``transform``; ``KNNGraph`` turns a feature matrix into a
graph so vector data can be fed to it inside a ``Pipeline``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .graph import GraphDataset, SparseGraph, knn_graph
from .model import RareConfig, embed, pretrain, pretrain_dataset

__all__ = ["RAREEmbedder", "KNNGraph", "check_graph"]


def check_graph(X, edges=None) -> SparseGraph:
    """Coerce ``X`` into a :class:`SparseGraph`.

    Accepts a graph, or an attribute matrix together with an ``(m, 2)`` edge array.
    """
    if isinstance(X, SparseGraph):
        if edges is not None:
            raise ValueError("edges given alongside a SparseGraph")
        return X
    if edges is None:
        raise TypeError(f"expected a SparseGraph or (attributes, edges), got {type(X).__name__}")
    X = check_array(X, dtype=(np.float64, np.float32))
    edges = check_array(edges, dtype=np.int64, ensure_min_samples=0)
    return SparseGraph(X.shape[0], edges, X)


class RAREEmbedder(TransformerMixin, BaseEstimator):
    """Self-supervised graph embedder.

    Parameters mirror :class:`rare.model.RareConfig`; ``random_state`` seeds
    initialization and every mask draw.
    """

    def __init__(self, backbone="gat", mask_ratio=0.75, alpha=6.0, scale_t=2.0, momentum=0.1,
                 layers=2, heads=4, hidden=256, latent_dim=256, lr=1e-3, epochs=200,
                 precision="f64", no_predictor=False, no_momentum_encoder=False,
                 momentum_input="masked", zero_tokens=False, latent_loss="mse", raw_loss="isce",
                 ema_swap=False, gin_eps=0.0, batch_size=32, random_state=0):
        self.backbone = backbone
        self.mask_ratio = mask_ratio
        self.alpha = alpha
        self.scale_t = scale_t
        self.momentum = momentum
        self.layers = layers
        self.heads = heads
        self.hidden = hidden
        self.latent_dim = latent_dim
        self.lr = lr
        self.epochs = epochs
        self.precision = precision
        self.no_predictor = no_predictor
        self.no_momentum_encoder = no_momentum_encoder
        self.momentum_input = momentum_input
        self.zero_tokens = zero_tokens
        self.latent_loss = latent_loss
        self.raw_loss = raw_loss
        self.ema_swap = ema_swap
        self.gin_eps = gin_eps
        self.batch_size = batch_size
        self.random_state = random_state

    def to_config(self) -> RareConfig:
        params = self.get_params()
        params.pop("random_state")
        return RareConfig(**params).validate()

    def fit(self, X, y=None, edges=None):
        """Pre-train on a graph (or a :class:`GraphDataset`). ``y`` is ignored."""
        cfg = self.to_config()
        seed = 0 if self.random_state is None else int(self.random_state)
        if isinstance(X, GraphDataset):
            self.model_, self.report_ = pretrain_dataset(X, cfg, seed)
            self.n_features_in_ = X.num_features
        else:
            g = check_graph(X, edges)
            self.model_, self.report_ = pretrain(g, cfg, seed)
            self.n_features_in_ = g.num_features
        return self

    def transform(self, X, edges=None):
        check_is_fitted(self, "model_")
        return embed(self.model_, check_graph(X, edges))

    def fit_transform(self, X, y=None, edges=None):
        return self.fit(X, y, edges=edges).transform(X, edges=edges)


class KNNGraph(TransformerMixin, BaseEstimator):
    """Stateless transformer: feature matrix -> union-symmetrized KNN graph."""

    def __init__(self, n_neighbors=10, metric="euclidean"):
        self.n_neighbors = n_neighbors
        self.metric = metric

    def fit(self, X, y=None):
        X = check_array(X)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        return knn_graph(X, self.n_neighbors, self.metric, labels=y)
