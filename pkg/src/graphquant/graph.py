"""Graph container, file I/O, degree normalization and train/quantify/test splits."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class Graph:
    """Immutable simple undirected graph with optional node features and labels.

    Parameters
    ----------
    adjacency : scipy.sparse.csr_matrix, shape (n, n)
        Symmetric 0/1 adjacency without self-loops.
    features : ndarray, shape (n, d), optional
    labels : ndarray of int, shape (n,), optional
        Class ids in ``0..K-1``; every class must occur at least once.
    num_classes : int, optional
        Inferred as ``1 + max(labels)`` when omitted.
    """

    adjacency: sp.csr_matrix
    features: Optional[np.ndarray] = None
    labels: Optional[np.ndarray] = None
    num_classes: Optional[int] = None

    def __post_init__(self):
        adj = sp.csr_matrix(self.adjacency, dtype=np.float64)
        n = adj.shape[0]
        if adj.shape != (n, n):
            raise ValueError(f"adjacency must be square, got {adj.shape}")
        adj.sum_duplicates()
        adj.eliminate_zeros()
        if (adj != adj.T).nnz:
            raise ValueError("adjacency is not symmetric")
        if adj.diagonal().any():
            raise ValueError("adjacency contains self-loops")
        adj.data[:] = 1.0
        adj.sort_indices()
        object.__setattr__(self, "adjacency", adj)

        if self.features is not None:
            x = np.asarray(self.features, dtype=np.float64)
            if x.ndim == 1:
                x = x[:, None]
            if x.shape[0] != n:
                raise ValueError(f"features have {x.shape[0]} rows, graph has {n} nodes")
            if not np.all(np.isfinite(x)):
                raise ValueError("features contain non-finite values")
            x.setflags(write=False)
            object.__setattr__(self, "features", x)

        k = self.num_classes
        if self.labels is not None:
            y = np.asarray(self.labels)
            if y.shape != (n,):
                raise ValueError(f"labels have shape {y.shape}, expected ({n},)")
            if not np.issubdtype(y.dtype, np.integer):
                raise ValueError("labels must be integers")
            y = y.astype(np.int64)
            if n and y.min() < 0:
                raise ValueError("labels must be non-negative")
            if k is None:
                k = int(y.max()) + 1 if n else 0
            if n and y.max() >= k:
                raise ValueError(f"label {int(y.max())} out of range for K={k}")
            missing = np.setdiff1d(np.arange(k), y)
            if missing.size:
                raise ValueError(f"classes {missing.tolist()} have no nodes")
            y.setflags(write=False)
            object.__setattr__(self, "labels", y)
        object.__setattr__(self, "num_classes", k)

    @property
    def num_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def num_edges(self) -> int:
        return self.adjacency.nnz // 2

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr)

    def neighbors(self, node: int) -> np.ndarray:
        a = self.adjacency
        return a.indices[a.indptr[node]:a.indptr[node + 1]]

    def edge_list(self) -> np.ndarray:
        """Undirected edges as an ``(m, 2)`` array with ``u < v``, sorted."""
        coo = sp.triu(self.adjacency, k=1).tocoo()
        edges = np.stack([coo.row, coo.col], axis=1).astype(np.int64)
        return edges[np.lexsort((edges[:, 1], edges[:, 0]))]


def from_edges(edges, num_nodes: int, features=None, labels=None, num_classes=None) -> Graph:
    """Build a :class:`Graph` from an edge array, symmetrizing and dropping
    self-loops and duplicates."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.size and (edges.min() < 0 or edges.max() >= num_nodes):
        raise ValueError(f"node id out of range [0, {num_nodes})")
    edges = edges[edges[:, 0] != edges[:, 1]]
    u = np.concatenate([edges[:, 0], edges[:, 1]])
    v = np.concatenate([edges[:, 1], edges[:, 0]])
    adj = sp.csr_matrix((np.ones(u.size), (u, v)), shape=(num_nodes, num_nodes))
    return Graph(adj, features=features, labels=labels, num_classes=num_classes)


def _read_edges(path) -> np.ndarray:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'u v', got {line.strip()!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-integer node id in {line.strip()!r}") from None
            if u < 0 or v < 0:
                raise ValueError(f"{path}:{lineno}: negative node id")
            rows.append((u, v))
    return np.array(rows, dtype=np.int64).reshape(-1, 2)


def _read_features(path) -> np.ndarray:
    try:
        x = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric cell ({exc})") from None
    return x


def _read_labels(path) -> np.ndarray:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s:
                continue
            try:
                out.append(int(s))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-integer label {s!r}") from None
    return np.array(out, dtype=np.int64)


def load_graph(edges_path, features_path=None, labels_path=None) -> Graph:
    """Load a graph from an edge list plus optional feature CSV and label file.

    The node count is taken from the features or labels file when given
    (they must agree), otherwise from the largest node id in the edge list.
    Edge ids beyond that count raise ``ValueError``.
    """
    edges = _read_edges(edges_path)
    features = _read_features(features_path) if features_path is not None else None
    labels = _read_labels(labels_path) if labels_path is not None else None

    sizes = {}
    if features is not None:
        sizes["features"] = features.shape[0]
    if labels is not None:
        sizes["labels"] = labels.shape[0]
    if len(set(sizes.values())) > 1:
        raise ValueError(f"row-count mismatch between files: {sizes}")
    if sizes:
        n = next(iter(sizes.values()))
    else:
        n = int(edges.max()) + 1 if edges.size else 0
    if edges.size and edges.max() >= n:
        raise ValueError(f"node id {int(edges.max())} out of range for {n} nodes")
    return from_edges(edges, n, features=features, labels=labels)


def save_graph(g: Graph, edges_path, features_path=None, labels_path=None) -> None:
    with open(edges_path, "w", encoding="utf-8") as fh:
        for u, v in g.edge_list():
            fh.write(f"{u} {v}\n")
    if features_path is not None and g.features is not None:
        np.savetxt(features_path, g.features, delimiter=",", fmt="%.17g")
    if labels_path is not None and g.labels is not None:
        np.savetxt(labels_path, g.labels, fmt="%d")


def normalized_adjacency(g: Graph) -> sp.csr_matrix:
    """Column-stochastic ``A D^-1``; an isolated node keeps its mass (column ``e_i``)."""
    deg = g.degrees.astype(np.float64)
    isolated = deg == 0
    inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=~isolated)
    abar = g.adjacency @ sp.diags(inv)
    if isolated.any():
        abar = abar + sp.diags(isolated.astype(np.float64))
    return sp.csr_matrix(abar)


@dataclass(frozen=True)
class Split:
    classifier_train: np.ndarray
    quantifier_train: np.ndarray
    quantifier_test_pool: np.ndarray
    seed: int = 0

    def __post_init__(self):
        for name in ("classifier_train", "quantifier_train", "quantifier_test_pool"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        parts = (self.classifier_train, self.quantifier_train, self.quantifier_test_pool)
        allnodes = np.concatenate(parts)
        if np.unique(allnodes).size != allnodes.size:
            raise ValueError("split parts overlap")

    @property
    def num_nodes(self) -> int:
        return sum(p.size for p in (self.classifier_train, self.quantifier_train,
                                    self.quantifier_test_pool))

    def to_json(self) -> dict:
        return {
            "classifier_train": self.classifier_train.tolist(),
            "quantifier_train": self.quantifier_train.tolist(),
            "quantifier_test_pool": self.quantifier_test_pool.tolist(),
            "seed": int(self.seed),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Split":
        try:
            return cls(obj["classifier_train"], obj["quantifier_train"],
                       obj["quantifier_test_pool"], int(obj["seed"]))
        except KeyError as exc:
            raise ValueError(f"split file missing key {exc.args[0]!r}") from None

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Split":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def split_sizes(n: int, ratios: Sequence[float]) -> np.ndarray:
    """Floor each ideal size, then hand leftover nodes to the largest fractional
    parts (ties to the earlier part)."""
    ratios = np.asarray(ratios, dtype=np.float64)
    if np.any(ratios <= 0):
        raise ValueError("split ratios must be positive")
    if abs(ratios.sum() - 1.0) > 1e-9:
        raise ValueError(f"split ratios sum to {ratios.sum()}, expected 1")
    ideal = n * ratios
    sizes = np.floor(ideal + 1e-9).astype(np.int64)
    frac = ideal - sizes
    leftover = n - sizes.sum()
    order = np.argsort(-frac, kind="stable")
    sizes[order[:leftover]] += 1
    return sizes


def make_split(g: Graph, ratios=(0.05, 0.15, 0.80), seed: int = 0) -> Split:
    """Uniform random partition of the nodes into classifier-train,
    quantifier-train and quantifier-test pool."""
    sizes = split_sizes(g.num_nodes, ratios)
    perm = np.random.default_rng(seed).permutation(g.num_nodes)
    a, b = sizes[0], sizes[0] + sizes[1]
    return Split(np.sort(perm[:a]), np.sort(perm[a:b]), np.sort(perm[b:]), int(seed))
