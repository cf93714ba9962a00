"""Node posteriors: multinomial logistic regression with optional PPR smoothing
of the logits, and loading of externally computed posteriors."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.special import log_softmax, softmax

from .graph import Graph, normalized_adjacency

ROW_SUM_TOL = 1e-6


@dataclass
class LogisticModel:
    """Weights ``(d, K)``, bias ``(K,)`` and training hyperparameters.

    When ``propagation`` is ``(alpha, steps)`` the logits of all nodes are
    smoothed with ``P = (alpha I + (1 - alpha) D^-1 A)^steps`` before the
    softmax, so predictions depend on the whole graph.
    """

    weights: np.ndarray
    bias: np.ndarray
    propagation: Optional[tuple] = None
    learning_rate: float = 0.5
    epochs: int = 300
    l2: float = 1e-3
    seed: int = 0
    history: list = field(default_factory=list, repr=False)

    @property
    def num_classes(self) -> int:
        return self.bias.shape[0]

    def to_json(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "propagation": list(self.propagation) if self.propagation else None,
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "l2": self.l2,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LogisticModel":
        prop = obj.get("propagation")
        return cls(np.asarray(obj["weights"], dtype=np.float64), np.asarray(obj["bias"], dtype=np.float64),
                   tuple(prop) if prop else None, obj["learning_rate"], obj["epochs"], obj["l2"], obj["seed"])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "LogisticModel":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


class Propagation:
    """Row-stochastic smoothing ``P = (alpha I + (1 - alpha) D^-1 A)^steps``,
    applied by repeated sparse products without forming ``P``."""

    def __init__(self, g: Graph, alpha: float, steps: int):
        if not 0.0 < alpha <= 1.0:
            raise ValueError(f"propagation alpha must lie in (0, 1], got {alpha}")
        if int(steps) != steps or steps < 0:
            raise ValueError(f"propagation steps must be a non-negative integer, got {steps}")
        self.alpha = alpha
        self.steps = int(steps)
        self._abar = normalized_adjacency(g)
        self._abar_t = sp.csr_matrix(self._abar.T)

    def apply(self, z: np.ndarray) -> np.ndarray:
        for _ in range(self.steps):
            z = self.alpha * z + (1.0 - self.alpha) * (self._abar_t @ z)
        return z

    def apply_transpose(self, z: np.ndarray) -> np.ndarray:
        for _ in range(self.steps):
            z = self.alpha * z + (1.0 - self.alpha) * (self._abar @ z)
        return z


def loss_and_grad(weights, bias, x, y_onehot, train_nodes, l2, prop: Optional[Propagation] = None):
    """Mean cross-entropy on ``train_nodes`` plus ``l2/2 * ||W||^2``.

    ``x`` holds features of every node so that ``prop`` can mix logits
    across the graph; without propagation only training rows matter.
    """
    n = train_nodes.size
    if prop is None:
        xt = x[train_nodes]
        z = xt @ weights + bias
    else:
        z = prop.apply(x @ weights + bias)[train_nodes]
    logp = log_softmax(z, axis=1)
    loss = -np.sum(y_onehot * logp) / n + 0.5 * l2 * np.sum(weights**2)
    g_z = (np.exp(logp) - y_onehot) / n
    if prop is None:
        grad_w = xt.T @ g_z
        grad_b = g_z.sum(axis=0)
    else:
        g_full = np.zeros((x.shape[0], weights.shape[1]))
        g_full[train_nodes] = g_z
        g_full = prop.apply_transpose(g_full)
        grad_w = x.T @ g_full
        grad_b = g_full.sum(axis=0)
    return loss, grad_w + l2 * weights, grad_b


def fit(g: Graph, train_nodes, *, learning_rate: float = 0.5, epochs: int = 300, l2: float = 1e-3,
        propagation: Optional[tuple] = None, seed: int = 0) -> LogisticModel:
    """Full-batch gradient descent from zero parameters (deterministic)."""
    if g.features is None:
        raise ValueError("graph has no features")
    if g.labels is None:
        raise ValueError("graph has no labels")
    train_nodes = np.asarray(train_nodes, dtype=np.int64)
    y = g.labels[train_nodes]
    if np.unique(y).size < 2:
        raise ValueError("training set contains a single class")
    k = g.num_classes
    x = g.features
    y_onehot = np.eye(k)[y]
    prop = Propagation(g, *propagation) if propagation else None

    weights = np.zeros((x.shape[1], k))
    bias = np.zeros(k)
    history = []
    for _ in range(int(epochs)):
        loss, gw, gb = loss_and_grad(weights, bias, x, y_onehot, train_nodes, l2, prop)
        history.append(loss)
        weights -= learning_rate * gw
        bias -= learning_rate * gb
    return LogisticModel(weights, bias, tuple(propagation) if propagation else None,
                         learning_rate, int(epochs), l2, seed, history)


def predict_proba(m: LogisticModel, g: Graph, nodes=None) -> np.ndarray:
    """Posterior rows for ``nodes`` (all nodes when ``None``)."""
    if g.features is None:
        raise ValueError("graph has no features")
    if g.features.shape[1] != m.weights.shape[0]:
        raise ValueError(f"model expects {m.weights.shape[0]} features, graph has {g.features.shape[1]}")
    if m.propagation:
        z = Propagation(g, *m.propagation).apply(g.features @ m.weights + m.bias)
        if nodes is not None:
            z = z[np.asarray(nodes, dtype=np.int64)]
    else:
        x = g.features if nodes is None else g.features[np.asarray(nodes, dtype=np.int64)]
        z = x @ m.weights + m.bias
    return softmax(z, axis=1)


def one_hot_posteriors(labels, num_classes: int) -> np.ndarray:
    """Posteriors of a perfect classifier."""
    return np.eye(num_classes)[np.asarray(labels, dtype=np.int64)]


def validate_posteriors(p, expected_k: Optional[int] = None, tol: float = ROW_SUM_TOL) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 2:
        raise ValueError(f"posteriors must be a matrix, got shape {p.shape}")
    if expected_k is not None and p.shape[1] != expected_k:
        raise ValueError(f"expected {expected_k} columns, got {p.shape[1]}")
    if not np.all(np.isfinite(p)):
        raise ValueError("posteriors contain non-finite values")
    bad = np.flatnonzero((p < 0).any(axis=1))
    if bad.size:
        raise ValueError(f"row {bad[0]}: negative entry")
    sums = p.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > tol)
    if bad.size:
        raise ValueError(f"row {bad[0]}: row sum {sums[bad[0]]:.6g}")
    return p / sums[:, None]


def load_posteriors(path, expected_k: Optional[int] = None) -> np.ndarray:
    """Read a headerless CSV of posterior rows, validating and renormalizing them."""
    try:
        p = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    return validate_posteriors(p, expected_k)


def save_posteriors(path, p) -> None:
    np.savetxt(path, np.asarray(p), delimiter=",", fmt="%.17g")
