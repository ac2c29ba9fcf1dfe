"""Downstream scoring: linear probe, graph pooling, and the outlier-robustness run."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .autodiff import Adam, Tensor
from .exceptions import ConfigError, DimensionError
from .graph import SparseGraph
from .model import RareConfig, TrainReport, embed, pretrain

__all__ = ["LinearProbe", "ProbeResult", "RobustnessTrace", "linear_probe", "split_indices",
           "pool_graph", "make_adversarial", "robustness_run"]


def _cross_entropy(scores, idx):
    if len(idx) == 0:
        return 0.0
    shifted = scores - scores.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1))
    return float(np.mean(logz - shifted[np.arange(len(idx)), idx]))


class LinearProbe(ClassifierMixin, BaseEstimator):
    """Multinomial logistic regression trained with Adam.

    Inputs are centered and divided by one global scale (a rotation-invariant
    normalization). With validation data, training stops after ``patience``
    epochs without improvement and the best weights are kept; improvement
    means higher validation accuracy, or equal accuracy at lower validation
    cross-entropy.
    """

    def __init__(self, lr=0.01, weight_decay=1e-4, max_epochs=500, patience=20, random_state=0):
        self.lr = lr
        self.weight_decay = weight_decay
        self.max_epochs = max_epochs
        self.patience = patience
        self.random_state = random_state

    def _scale(self, X):
        return (X - self.mean_) / self.scale_

    def fit(self, X, y, X_val=None, y_val=None):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        self.n_features_in_ = X.shape[1]
        self.mean_ = X.mean(axis=0)
        spread = float(np.sqrt(np.mean((X - self.mean_) ** 2)))
        self.scale_ = spread if spread > 0 else 1.0
        Xs = self._scale(X)
        n, k = Xs.shape[0], len(self.classes_)
        rng = np.random.default_rng(self.random_state)
        bound = math.sqrt(6.0 / (Xs.shape[1] + k))
        W = Tensor(rng.uniform(-bound, bound, (Xs.shape[1], k)), requires_grad=True)
        b = Tensor(np.zeros((1, k)), requires_grad=True)
        opt = Adam([W, b], lr=self.lr)
        onehot = np.eye(k)[y_idx]

        use_val = X_val is not None and len(X_val) > 0
        if use_val:
            X_val = self._scale(check_array(X_val, dtype=np.float64))
            y_val = np.asarray(y_val)
            known = np.isin(y_val, self.classes_)
            val_idx = np.searchsorted(self.classes_, y_val[known])
        best = (-1.0, math.inf, W.data.copy(), b.data.copy())
        stale = 0
        self.n_epochs_ = 0
        for epoch in range(self.max_epochs):
            logits = Xs @ W.data + b.data
            logits -= logits.max(axis=1, keepdims=True)
            prob = np.exp(logits)
            prob /= prob.sum(axis=1, keepdims=True)
            delta = (prob - onehot) / n
            opt.step([Xs.T @ delta + self.weight_decay * W.data, delta.sum(axis=0, keepdims=True)])
            self.n_epochs_ = epoch + 1
            if use_val:
                scores = X_val @ W.data + b.data
                acc = float(np.mean(self.classes_[np.argmax(scores, 1)] == y_val))
                loss = _cross_entropy(scores[known], val_idx)
                if acc > best[0] or (acc == best[0] and loss < best[1]):
                    best, stale = (acc, loss, W.data.copy(), b.data.copy()), 0
                else:
                    stale += 1
                    if stale >= self.patience:
                        break
        if use_val:
            W.data, b.data = best[2], best[3]
        self.coef_, self.intercept_ = W.data, b.data.reshape(-1)
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise DimensionError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return self._scale(X) @ self.coef_ + self.intercept_

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]


@dataclass
class ProbeResult:
    accuracies: list
    seeds: list
    split_sizes: tuple

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.accuracies))

    def __str__(self):
        return f"{self.mean:.4f} ± {self.std:.4f} over {len(self.accuracies)} runs"

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("run,seed,accuracy\n")
            for i, (s, a) in enumerate(zip(self.seeds, self.accuracies)):
                fh.write(f"{i},{s},{a!r}\n")


def split_indices(labels, split=(0.1, 0.1, 0.8), seed=0, max_attempts=10):
    """Random train/val/test index split in which every class appears in train.

    Returns ``(train, val, test, seed_used)``; a split missing a class is
    redrawn with the next seed.
    """
    labels = np.asarray(labels)
    split = tuple(float(s) for s in split)
    if len(split) != 3 or min(split) < 0 or not math.isclose(sum(split), 1.0, abs_tol=1e-9):
        raise ConfigError("split", f"split fractions must be three non-negatives summing to 1: {split}")
    n = len(labels)
    n_train = max(1, int(round(split[0] * n)))
    n_val = int(round(split[1] * n))
    classes = np.unique(labels)
    for attempt in range(max_attempts):
        perm = np.random.default_rng(seed + attempt).permutation(n)
        train = perm[:n_train]
        if np.array_equal(np.unique(labels[train]), classes):
            return train, perm[n_train:n_train + n_val], perm[n_train + n_val:], seed + attempt
    raise ConfigError("split", f"no split with every class in train after {max_attempts} attempts")


def _probe_once(embeddings, labels, split, seed):
    train, val, test, _ = split_indices(labels, split, seed)
    clf = LinearProbe(random_state=seed).fit(embeddings[train], labels[train],
                                             embeddings[val], labels[val])
    return float(clf.score(embeddings[test], labels[test])), (len(train), len(val), len(test))


def linear_probe(embeddings, labels, split=(0.1, 0.1, 0.8), runs=10, seed=0, jobs=1) -> ProbeResult:
    """Test accuracy of a :class:`LinearProbe` over ``runs`` random splits."""
    embeddings = check_array(embeddings, dtype=np.float64)
    labels = np.asarray(labels)
    if labels.shape[0] != embeddings.shape[0]:
        raise DimensionError("one label per embedding row required")
    seeds = [seed + 1000 * i for i in range(runs)]
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            results = list(pool.map(lambda s: _probe_once(embeddings, labels, split, s), seeds))
    else:
        results = [_probe_once(embeddings, labels, split, s) for s in seeds]
    return ProbeResult([r[0] for r in results], seeds, results[0][1] if results else (0, 0, 0))


def pool_graph(embeddings, mode: str = "mean") -> np.ndarray:
    embeddings = np.asarray(embeddings)
    if embeddings.ndim != 2 or embeddings.shape[0] == 0:
        raise DimensionError("pool_graph needs at least one node embedding")
    if mode == "max":
        return embeddings.max(axis=0)
    # summing each column in sorted order makes the result independent of node order
    ordered = np.sort(embeddings, axis=0)
    if mode == "mean":
        return ordered.mean(axis=0)
    if mode == "sum":
        return ordered.sum(axis=0)
    raise ConfigError("pooling", f"unknown pooling mode {mode!r}")


ADVERSARIAL_MODES = ("within_row", "across_rows")


def make_adversarial(g: SparseGraph, outlier_fraction: float = 0.05, seed: int = 0,
                     mode: str = "within_row"):
    """Turn a random node subset into attribute outliers.

    ``within_row`` permutes the entries of each chosen row; ``across_rows``
    permutes whole attribute rows among the chosen nodes, so an outlier
    carries another node's attributes. Returns ``(adversarial_graph,
    outlier_idx)``; edges and labels are kept.
    """
    if not 0.0 < outlier_fraction < 1.0:
        raise ConfigError("outlier_fraction", "outlier fraction must lie in (0, 1)")
    if mode not in ADVERSARIAL_MODES:
        raise ConfigError("outlier_mode", f"must be one of {ADVERSARIAL_MODES}, got {mode!r}")
    rng = np.random.default_rng(seed)
    count = int(round(outlier_fraction * g.num_nodes))
    outliers = np.sort(rng.choice(g.num_nodes, size=count, replace=False))
    attrs = g.attributes.copy()
    if mode == "across_rows":
        attrs[outliers] = attrs[outliers[rng.permutation(count)]]
    else:
        for i in outliers:
            attrs[i] = attrs[i, rng.permutation(attrs.shape[1])]
    return g.with_attributes(attrs), outliers


@dataclass
class RobustnessTrace:
    outlier_idx: np.ndarray
    report: TrainReport
    adversarial_probe: ProbeResult | None = None
    clean_probe: ProbeResult | None = None
    extra: dict = field(default_factory=dict)

    def final_quartile(self, column: str) -> float:
        values = np.asarray(getattr(self.report, column), dtype=float)
        tail = values[len(values) - max(1, len(values) // 4):]
        tail = tail[~np.isnan(tail)]
        return float(tail.mean()) if tail.size else math.nan

    def to_csv(self, path) -> None:
        self.report.to_csv(path)


def robustness_run(g: SparseGraph, cfg: RareConfig, outlier_fraction: float = 0.05, seed: int = 0,
                   probe_runs: int = 5, split=(0.1, 0.1, 0.8),
                   mode: str = "within_row") -> RobustnessTrace:
    """Pre-train on a row-shuffled copy of ``g`` while tracking per-group losses.

    Afterwards the backbone embeddings of the adversarial and the clean graph
    are each scored with the linear probe when labels exist.
    """
    adv, outliers = make_adversarial(g, outlier_fraction, seed, mode)
    model, report = pretrain(adv, cfg, seed, outlier_idx=outliers)
    trace = RobustnessTrace(outliers, report)
    if g.labels is not None and probe_runs > 0:
        trace.adversarial_probe = linear_probe(embed(model, adv), g.labels, split, probe_runs, seed)
        trace.clean_probe = linear_probe(embed(model, g), g.labels, split, probe_runs, seed)
    return trace
