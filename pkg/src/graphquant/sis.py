"""Structural importance sampling: kernel density ratios over graph vertices.

The test density of a training vertex is estimated from its kernel affinity
to the test sample, the training density from its affinity to the training
set, and their ratio reweights the labelled training vertices class by class.
The label-prior part of the ratio cancels inside each per-class
normalization, so it is never computed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .graph import Graph
from .kernels import VertexKernel

DEFAULT_FLOOR = 1e-12
# Normalized weights are snapped to this many mantissa bits so that a global
# rescaling of rho (which perturbs the last bits) yields bit-identical weights.
WEIGHT_MANTISSA_BITS = 24


@dataclass(frozen=True)
class SisWeights:
    """Importance weights for the labelled training vertices.

    Attributes
    ----------
    train_nodes : ndarray of int
    labels : ndarray of int
        Labels of ``train_nodes`` (same order).
    rho : ndarray
        Estimated density ratio per training vertex.
    num_classes : int
    """

    train_nodes: np.ndarray
    labels: np.ndarray
    rho: np.ndarray
    num_classes: int
    per_class_norm: np.ndarray = field(init=False)

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=np.float64)
        if rho.shape != np.shape(self.train_nodes) or rho.shape != np.shape(self.labels):
            raise ValueError("rho, train_nodes and labels must have equal length")
        if not np.all(np.isfinite(rho)) or np.any(rho < 0):
            raise ValueError("rho must be finite and non-negative")
        object.__setattr__(self, "rho", rho)
        norm = np.bincount(self.labels, weights=rho, minlength=self.num_classes)
        object.__setattr__(self, "per_class_norm", norm)

    @property
    def zero_mass_classes(self) -> tuple:
        present = np.bincount(self.labels, minlength=self.num_classes) > 0
        return tuple(int(i) for i in np.flatnonzero(present & (self.per_class_norm <= 0)))

    def scaled(self, c: float) -> "SisWeights":
        return SisWeights(self.train_nodes, self.labels, self.rho * c, self.num_classes)


class ClassWeights(NamedTuple):
    """Instance weights aligned with the training vertices; each class sums to 1."""

    weights: np.ndarray
    fallback: tuple


def kde_density(g: Graph, eval_nodes, reference_nodes, kernel: VertexKernel) -> np.ndarray:
    """Mean kernel affinity of each evaluation node to the reference set."""
    reference_nodes = np.asarray(reference_nodes, dtype=np.int64)
    if reference_nodes.size == 0:
        raise ValueError("reference set is empty")
    return kernel(g, eval_nodes, reference_nodes).values.mean(axis=1)


def density_ratio(g: Graph, train_nodes, test_nodes, q_kernel: VertexKernel,
                  p_kernel: VertexKernel | None = None, floor: float = DEFAULT_FLOOR) -> SisWeights:
    """Estimate ``rho = q_X / p_X`` at every training vertex.

    ``q_X`` is the kernel density of the test sample and ``p_X`` that of the
    training set; a constant ``p_kernel`` (the default) makes ``rho = q_X``.
    """
    if g.labels is None:
        raise ValueError("graph has no labels")
    if floor < 0:
        raise ValueError(f"floor must be non-negative, got {floor}")
    train_nodes = np.asarray(train_nodes, dtype=np.int64)
    test_nodes = np.asarray(test_nodes, dtype=np.int64)
    if train_nodes.size == 0 or test_nodes.size == 0:
        raise ValueError("train and test node sets must be non-empty")
    p_kernel = p_kernel or VertexKernel("constant")

    q_hat = kde_density(g, train_nodes, test_nodes, q_kernel)
    if p_kernel.is_constant:
        rho = q_hat
    else:
        p_hat = kde_density(g, train_nodes, train_nodes, p_kernel)
        rho = q_hat / np.maximum(p_hat, floor)
    return SisWeights(train_nodes, g.labels[train_nodes], rho, g.num_classes)


def _snap(x: np.ndarray, bits: int = WEIGHT_MANTISSA_BITS) -> np.ndarray:
    mant, expo = np.frexp(x)
    return np.ldexp(np.round(mant * 2.0**bits) / 2.0**bits, expo)


def class_weights(w: SisWeights, labels=None) -> ClassWeights:
    """Normalize ``rho`` within each class.

    A class whose training vertices all carry zero weight falls back to
    uniform weights and is reported in ``fallback``.
    """
    labels = w.labels if labels is None else np.asarray(labels, dtype=np.int64)
    if labels.shape != w.rho.shape:
        raise ValueError("labels must align with the training vertices")
    counts = np.bincount(labels, minlength=w.num_classes)
    if np.any(counts == 0):
        raise ValueError(f"classes {np.flatnonzero(counts == 0).tolist()} have no training instances")

    out = np.empty_like(w.rho)
    fallback = []
    for i in range(w.num_classes):
        idx = labels == i
        r = w.rho[idx]
        total = r.sum()
        if total > 0 and np.isfinite(total):
            v = _snap(r / total)
            out[idx] = v / v.sum()
        else:
            out[idx] = 1.0 / idx.sum()
            fallback.append(i)
    return ClassWeights(out, tuple(fallback))
