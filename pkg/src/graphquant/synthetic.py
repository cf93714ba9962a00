"""Synthetic labelled graphs and posterior generators for tests and demos."""

from __future__ import annotations

import numpy as np

from .graph import Graph, from_edges


def cluster_graph(n_nodes: int = 300, n_clusters: int = 3, p_in: float = 0.1, p_out: float = 0.005,
                  label_noise: float = 0.05, n_features: int = 8, feature_scale: float = 1.0,
                  seed: int = 0) -> Graph:
    """Stochastic block graph whose clusters carry the class labels.

    A ``label_noise`` fraction of nodes, preferably ones with an edge into
    another cluster, take the label of such a neighbouring cluster. Features
    are Gaussian around a per-class mean (``feature_scale`` times a one-hot
    direction) with unit noise.
    """
    rng = np.random.default_rng(seed)
    cluster = np.arange(n_nodes) * n_clusters // n_nodes
    same = cluster[:, None] == cluster[None, :]
    prob = np.where(same, p_in, p_out)
    upper = np.triu(rng.random((n_nodes, n_nodes)) < prob, k=1)
    u, v = np.nonzero(upper)
    edges = np.stack([u, v], axis=1)

    labels = cluster.copy()
    n_flip = int(round(label_noise * n_nodes))
    cross = {}
    for a, b in edges[cluster[u] != cluster[v]]:
        cross.setdefault(int(a), []).append(int(cluster[b]))
        cross.setdefault(int(b), []).append(int(cluster[a]))
    boundary = np.array(sorted(cross), dtype=np.int64)
    picked = rng.choice(boundary, size=min(n_flip, boundary.size), replace=False)
    for node in picked:
        labels[node] = rng.choice(cross[int(node)])
    if picked.size < n_flip:
        rest = np.setdiff1d(np.arange(n_nodes), picked)
        for node in rng.choice(rest, size=n_flip - picked.size, replace=False):
            others = [c for c in range(n_clusters) if c != cluster[node]]
            labels[node] = rng.choice(others)

    means = np.zeros((n_clusters, n_features))
    means[np.arange(n_clusters), np.arange(n_clusters) % n_features] = feature_scale
    features = means[labels] + rng.normal(size=(n_nodes, n_features))
    return from_edges(edges, n_nodes, features=features, labels=labels, num_classes=n_clusters)


def simplex_gaussian_posteriors(n_per_class, means, scale: float, rng: np.random.Generator):
    """Posterior-like vectors: Gaussian draws around ``means[i]``, folded to be
    non-negative and renormalized onto the simplex.

    Returns ``(posteriors, labels)``.
    """
    means = np.asarray(means, dtype=np.float64)
    rows, labels = [], []
    for i, n in enumerate(np.broadcast_to(n_per_class, (means.shape[0],))):
        x = np.abs(rng.normal(means[i], scale, size=(int(n), means.shape[1]))) + 1e-12
        rows.append(x / x.sum(axis=1, keepdims=True))
        labels.append(np.full(int(n), i))
    return np.vstack(rows), np.concatenate(labels)
