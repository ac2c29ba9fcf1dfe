"""Node-attributed graphs, adjacency normalization, generators and file I/O."""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .exceptions import ConfigError, GraphFormatError

__all__ = [
    "SparseGraph",
    "NormalizedAdjacency",
    "GraphDataset",
    "normalize_adjacency",
    "aggregation_adjacency",
    "knn_indices",
    "knn_graph",
    "generate_sbm",
    "batch_graphs",
    "load_graph",
    "save_graph",
    "load_dataset",
    "save_dataset",
]


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class SparseGraph:
    """Undirected, unweighted graph with a dense node attribute matrix.

    Edges are canonicalized on construction: each pair is stored once as
    ``(lo, hi)`` in lexicographic order, self-loops and duplicates dropped.
    Neighbor lists are kept in CSR form (``indptr``/``indices``), sorted.
    """

    def __init__(self, num_nodes, edges, attributes, labels=None):
        num_nodes = int(num_nodes)
        if num_nodes < 0:
            raise ValueError("num_nodes must be non-negative")
        attributes = np.asarray(attributes)
        if attributes.dtype not in (np.float32, np.float64):
            attributes = attributes.astype(np.float64)
        attributes = attributes.copy()
        if attributes.ndim != 2 or attributes.shape[0] != num_nodes:
            raise ValueError(
                f"attributes must have shape ({num_nodes}, D), got {attributes.shape}")
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= num_nodes):
            raise ValueError(f"edge endpoint out of range [0, {num_nodes})")
        edges = np.sort(edges, axis=1)
        edges = edges[edges[:, 0] != edges[:, 1]]
        edges = np.unique(edges, axis=0) if len(edges) else np.empty((0, 2), np.int64)

        if labels is not None:
            labels = np.array(labels, dtype=np.int64, copy=True).reshape(-1)
            if labels.shape[0] != num_nodes:
                raise ValueError("labels length must equal num_nodes")
            if labels.size and labels.min() < 0:
                raise ValueError("labels must be non-negative")
            labels = _readonly(labels)

        self.num_nodes = num_nodes
        self.edges = _readonly(edges)
        self.attributes = _readonly(attributes)
        self.labels = labels

        src = np.concatenate([edges[:, 0], edges[:, 1]])
        dst = np.concatenate([edges[:, 1], edges[:, 0]])
        order = np.lexsort((dst, src))
        counts = np.bincount(src, minlength=num_nodes)
        indptr = np.zeros(num_nodes + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        self.indptr = _readonly(indptr)
        self.indices = _readonly(dst[order].astype(np.int64))
        self._norm_adj = None

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_features(self) -> int:
        return self.attributes.shape[1]

    @property
    def num_classes(self) -> int:
        if self.labels is None or self.labels.size == 0:
            return 0
        return int(self.labels.max()) + 1

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def with_attributes(self, attributes) -> "SparseGraph":
        return SparseGraph(self.num_nodes, self.edges, attributes, self.labels)

    def normalized_adjacency(self) -> "NormalizedAdjacency":
        if self._norm_adj is None:
            self._norm_adj = normalize_adjacency(self)
        return self._norm_adj

    def __eq__(self, other):
        if not isinstance(other, SparseGraph):
            return NotImplemented
        if (self.labels is None) != (other.labels is None):
            return False
        return (
            self.num_nodes == other.num_nodes
            and np.array_equal(self.edges, other.edges)
            and self.attributes.shape == other.attributes.shape
            and np.array_equal(self.attributes, other.attributes)
            and (self.labels is None or np.array_equal(self.labels, other.labels))
        )

    __hash__ = None

    def __repr__(self):
        return (f"SparseGraph(num_nodes={self.num_nodes}, num_edges={self.num_edges}, "
                f"num_features={self.num_features})")


@dataclass(frozen=True)
class NormalizedAdjacency:
    """Symmetric CSR matrix with self-loops on every node.

    ``row`` expands ``indptr`` so that entry ``e`` sits at ``(row[e], indices[e])``.
    """

    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    num_nodes: int

    @property
    def row(self) -> np.ndarray:
        return np.repeat(np.arange(self.num_nodes), np.diff(self.indptr))

    @property
    def nnz(self) -> int:
        return len(self.indices)

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.num_nodes, self.num_nodes))
        out[self.row, self.indices] = self.data
        return out

    def with_data(self, data) -> "NormalizedAdjacency":
        return NormalizedAdjacency(self.indptr, self.indices, _readonly(np.asarray(data, float)),
                                   self.num_nodes)


def _with_self_loops(g: SparseGraph):
    n = g.num_nodes
    counts = g.degrees() + 1
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    row = np.repeat(np.arange(n), g.degrees())
    rows = np.concatenate([row, np.arange(n)])
    cols = np.concatenate([g.indices, np.arange(n)])
    order = np.lexsort((cols, rows))
    return indptr, cols[order]


def normalize_adjacency(g: SparseGraph) -> NormalizedAdjacency:
    """Return ``D^-1/2 (A + I) D^-1/2`` where D is the degree matrix of ``A + I``."""
    indptr, indices = _with_self_loops(g)
    deg = (g.degrees() + 1).astype(np.float64)
    inv_sqrt = 1.0 / np.sqrt(deg)
    row = np.repeat(np.arange(g.num_nodes), np.diff(indptr))
    data = inv_sqrt[row] * inv_sqrt[indices]
    return NormalizedAdjacency(_readonly(indptr), _readonly(indices), _readonly(data), g.num_nodes)


def aggregation_adjacency(g: SparseGraph, eps: float = 0.0) -> NormalizedAdjacency:
    """Unnormalized ``A + (1 + eps) I`` on the same pattern, for sum aggregation."""
    adj = g.normalized_adjacency()
    row = adj.row
    data = np.where(row == adj.indices, 1.0 + eps, 1.0)
    return adj.with_data(data)


def knn_indices(points, k: int) -> np.ndarray:
    """Indices of the ``k`` nearest other points per row (euclidean).

    Ties are broken by the lower index, so the result is deterministic.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("points must be a 2-D array")
    n = points.shape[0]
    if k < 1 or k >= n:
        raise ConfigError("k", f"k must satisfy 1 <= k < N (got k={k}, N={n})")
    out = np.empty((n, k), dtype=np.int64)
    # difference form rather than |a|^2+|b|^2-2ab so equal distances compare equal
    chunk = max(1, 2 ** 22 // max(n * points.shape[1], 1))
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        diff = points[start:stop, None, :] - points[None, :, :]
        dist = np.einsum("ijk,ijk->ij", diff, diff)
        dist[np.arange(stop - start), np.arange(start, stop)] = np.inf
        out[start:stop] = np.argsort(dist, axis=1, kind="stable")[:, :k]
    return out


def knn_graph(points, k: int = 10, metric: str = "euclidean", labels=None) -> SparseGraph:
    """Union-symmetrized k-nearest-neighbor graph with ``points`` as attributes."""
    if metric != "euclidean":
        raise ConfigError("metric", f"unsupported metric {metric!r}")
    points = np.asarray(points, dtype=np.float64)
    nbrs = knn_indices(points, k)
    src = np.repeat(np.arange(points.shape[0]), k)
    edges = np.stack([src, nbrs.reshape(-1)], axis=1)
    return SparseGraph(points.shape[0], edges, points, labels)


def generate_sbm(block_sizes: Sequence[int], p_in: float, p_out: float, feature_dim: int = 16,
                 feature_shift: float = 1.0, seed: int = 0) -> SparseGraph:
    """Sample a stochastic block model graph with Gaussian node attributes.

    Node attributes are standard normal plus ``block * feature_shift`` on every
    coordinate; labels are block indices.
    """
    block_sizes = [int(b) for b in block_sizes]
    if not block_sizes or any(b < 0 for b in block_sizes):
        raise ConfigError("block_sizes", "block_sizes must be a nonempty list of sizes")
    if not 0.0 <= p_out <= p_in <= 1.0:
        raise ConfigError("p_in", f"need 0 <= p_out <= p_in <= 1 (got p_in={p_in}, p_out={p_out})")
    rng = np.random.default_rng(seed)
    offsets = np.concatenate([[0], np.cumsum(block_sizes)])
    n = int(offsets[-1])
    parts = []
    for a, size_a in enumerate(block_sizes):
        for b in range(a, len(block_sizes)):
            size_b = block_sizes[b]
            if a == b:
                iu, ju = np.triu_indices(size_a, k=1)
                hit = rng.random(len(iu)) < p_in
                parts.append(np.stack([iu[hit], ju[hit]], axis=1) + offsets[a])
            else:
                hit = rng.random((size_a, size_b)) < p_out
                ii, jj = np.nonzero(hit)
                parts.append(np.stack([ii + offsets[a], jj + offsets[b]], axis=1))
    edges = np.concatenate(parts) if parts else np.empty((0, 2), np.int64)
    labels = np.repeat(np.arange(len(block_sizes)), block_sizes)
    attrs = rng.standard_normal((n, int(feature_dim))) + labels[:, None] * feature_shift
    return SparseGraph(n, edges, attrs, labels)


@dataclass
class GraphDataset:
    """A list of graphs sharing one attribute dimension, with optional graph labels."""

    graphs: list
    labels: np.ndarray | None = None

    def __post_init__(self):
        dims = {g.num_features for g in self.graphs}
        if len(dims) > 1:
            raise ValueError(f"graphs disagree on attribute dimension: {sorted(dims)}")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if len(self.labels) != len(self.graphs):
                raise ValueError("one label per graph required")

    def __len__(self):
        return len(self.graphs)

    def __iter__(self):
        return iter(self.graphs)

    def __getitem__(self, i):
        return self.graphs[i]

    @property
    def num_features(self) -> int:
        return self.graphs[0].num_features


def batch_graphs(graphs: Iterable[SparseGraph]):
    """Block-diagonal union of graphs. Returns ``(graph, graph_index_per_node)``."""
    graphs = list(graphs)
    if not graphs:
        raise ValueError("cannot batch an empty list of graphs")
    offset = 0
    edges, attrs, owner = [], [], []
    for i, g in enumerate(graphs):
        edges.append(g.edges + offset)
        attrs.append(g.attributes)
        owner.append(np.full(g.num_nodes, i, dtype=np.int64))
        offset += g.num_nodes
    return SparseGraph(offset, np.concatenate(edges), np.concatenate(attrs)), np.concatenate(owner)


# ---------------------------------------------------------------------------
# file formats


def _read_lines(path):
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read().splitlines()


def load_graph(attr_path, edge_path, label_path=None) -> SparseGraph:
    """Read a graph from attribute CSV, edge TSV and optional label file."""
    rows = []
    width = None
    for lineno, line in enumerate(_read_lines(attr_path), 1):
        if not line.strip():
            continue
        try:
            row = [float(v) for v in line.split(",")]
        except ValueError as exc:
            raise GraphFormatError(attr_path, lineno, f"malformed attribute row: {exc}") from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise GraphFormatError(attr_path, lineno,
                                   f"expected {width} attributes, found {len(row)}")
        rows.append(row)
    n = len(rows)
    attrs = np.array(rows, dtype=np.float64).reshape(n, width or 0)

    edges = []
    for lineno, line in enumerate(_read_lines(edge_path), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise GraphFormatError(edge_path, lineno, "expected 'src<TAB>dst'")
        try:
            src, dst = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(edge_path, lineno, "edge endpoints must be integers") from None
        for v in (src, dst):
            if not 0 <= v < n:
                raise GraphFormatError(edge_path, lineno, f"node {v} out of range [0, {n})")
        if src == dst:
            raise GraphFormatError(edge_path, lineno, f"self-loop on node {src}")
        edges.append((src, dst))

    labels = None
    if label_path is not None:
        labels = []
        for lineno, line in enumerate(_read_lines(label_path), 1):
            if not line.strip():
                continue
            try:
                labels.append(int(line))
            except ValueError:
                raise GraphFormatError(label_path, lineno, "label must be an integer") from None
            if labels[-1] < 0:
                raise GraphFormatError(label_path, lineno, "label must be non-negative")
        if len(labels) != n:
            raise GraphFormatError(label_path, len(labels),
                                   f"{len(labels)} labels for {n} nodes")
    return SparseGraph(n, np.array(edges, dtype=np.int64).reshape(-1, 2), attrs, labels)


def load_graph_dir(directory) -> SparseGraph:
    label_path = os.path.join(directory, "labels.txt")
    return load_graph(os.path.join(directory, "attrs.csv"), os.path.join(directory, "edges.tsv"),
                      label_path if os.path.exists(label_path) else None)


def save_graph(g: SparseGraph, directory) -> None:
    """Write ``attrs.csv``, ``edges.tsv`` and (if labeled) ``labels.txt``."""
    os.makedirs(directory, exist_ok=True)
    # %.17g keeps float64 round-trips exact
    np.savetxt(os.path.join(directory, "attrs.csv"), g.attributes, fmt="%.17g", delimiter=",")
    with open(os.path.join(directory, "edges.tsv"), "w", encoding="utf-8") as fh:
        fh.writelines(f"{s}\t{d}\n" for s, d in g.edges)
    if g.labels is not None:
        with open(os.path.join(directory, "labels.txt"), "w", encoding="utf-8") as fh:
            fh.writelines(f"{v}\n" for v in g.labels)


def save_dataset(ds: GraphDataset, directory) -> None:
    """One ``graph_XXXX`` subdirectory per graph plus ``graph_labels.txt``."""
    os.makedirs(directory, exist_ok=True)
    for i, g in enumerate(ds.graphs):
        save_graph(g, os.path.join(directory, f"graph_{i:05d}"))
    if ds.labels is not None:
        with open(os.path.join(directory, "graph_labels.txt"), "w", encoding="utf-8") as fh:
            fh.writelines(f"{v}\n" for v in ds.labels)


def load_dataset(directory) -> GraphDataset:
    names = sorted(d for d in os.listdir(directory)
                   if d.startswith("graph_") and os.path.isdir(os.path.join(directory, d)))
    graphs = [load_graph_dir(os.path.join(directory, d)) for d in names]
    labels = None
    path = os.path.join(directory, "graph_labels.txt")
    if os.path.exists(path):
        labels = [int(v) for v in _read_lines(path) if v.strip()]
    return GraphDataset(graphs, labels)
