"""Vertex affinity kernels evaluated lazily on (sources x targets) slices.

All PPR values follow the column convention ``Pi[source, target]`` with
``Pi = (alpha I + (1 - alpha) A D^-1)^L``: column ``t`` is the distribution of
an L-step lazy walk started at ``t``. Density-ratio code evaluates training
nodes as sources against test nodes as targets.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.sparse.csgraph import shortest_path

from .graph import Graph, normalized_adjacency

KINDS = ("ppr", "sp", "interpolated-ppr", "constant")


@dataclass(frozen=True)
class KernelSlice:
    sources: np.ndarray
    targets: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class VertexKernel:
    """Kernel kind plus parameters.

    ``alpha``/``steps`` configure PPR, ``lambda_sp`` the shortest-path decay and
    ``lambda_mix`` the interpolation ``lambda_mix * ppr + (1 - lambda_mix)``.
    """

    kind: str = "ppr"
    alpha: float = 0.1
    steps: int = 10
    lambda_sp: float = 0.5
    lambda_mix: float = 0.9

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}; expected one of {KINDS}")
        if self.kind in ("ppr", "interpolated-ppr"):
            if not 0.0 < self.alpha < 1.0:
                raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
            if int(self.steps) != self.steps or self.steps < 1:
                raise ValueError(f"steps must be a positive integer, got {self.steps}")
        if self.kind == "sp" and not self.lambda_sp > 0:
            raise ValueError(f"lambda_sp must be positive, got {self.lambda_sp}")
        if self.kind == "interpolated-ppr" and not 0.0 <= self.lambda_mix <= 1.0:
            raise ValueError(f"lambda_mix must lie in [0, 1], got {self.lambda_mix}")

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant" or (self.kind == "interpolated-ppr" and self.lambda_mix == 0)

    def __call__(self, g: Graph, sources, targets) -> KernelSlice:
        if self.kind == "ppr":
            return ppr_kernel(g, self.alpha, self.steps, sources, targets)
        if self.kind == "sp":
            return sp_kernel(g, self.lambda_sp, sources, targets)
        if self.kind == "interpolated-ppr":
            return interpolated_ppr(g, self.alpha, self.steps, self.lambda_mix, sources, targets)
        return constant_kernel(g, sources, targets)

    def to_config(self) -> dict:
        return asdict(self)

    @classmethod
    def from_config(cls, cfg: dict) -> "VertexKernel":
        known = {"kind", "alpha", "steps", "lambda_sp", "lambda_mix"}
        extra = set(cfg) - known
        if extra:
            raise ValueError(f"unknown kernel config keys {sorted(extra)}")
        return cls(**cfg)


def _ids(nodes, n) -> np.ndarray:
    ids = np.asarray(nodes, dtype=np.int64).reshape(-1)
    if ids.size and (ids.min() < 0 or ids.max() >= n):
        raise ValueError(f"node id out of range [0, {n})")
    return ids


def ppr_columns(g: Graph, alpha: float, steps: int, targets) -> np.ndarray:
    """Dense ``n x |targets|`` block of ``Pi`` via ``steps`` sparse products."""
    n = g.num_nodes
    targets = _ids(targets, n)
    abar = normalized_adjacency(g)
    cols = np.zeros((n, targets.size))
    cols[targets, np.arange(targets.size)] = 1.0
    for _ in range(int(steps)):
        cols = alpha * cols + (1.0 - alpha) * (abar @ cols)
    return cols


def ppr_kernel(g: Graph, alpha: float, steps: int, sources, targets) -> KernelSlice:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if int(steps) != steps or steps < 1:
        raise ValueError(f"steps must be a positive integer, got {steps}")
    sources = _ids(sources, g.num_nodes)
    targets = _ids(targets, g.num_nodes)
    values = ppr_columns(g, alpha, steps, targets)[sources]
    return KernelSlice(sources, targets, values)


def shortest_path_lengths(g: Graph, sources) -> np.ndarray:
    """Unit-length BFS distances from each source to every node (``inf`` if unreachable)."""
    sources = _ids(sources, g.num_nodes)
    if sources.size == 0:
        return np.zeros((0, g.num_nodes))
    return shortest_path(g.adjacency, directed=False, unweighted=True, indices=sources)


def sp_kernel(g: Graph, lambda_sp: float, sources, targets) -> KernelSlice:
    if not lambda_sp > 0:
        raise ValueError(f"lambda_sp must be positive, got {lambda_sp}")
    sources = _ids(sources, g.num_nodes)
    targets = _ids(targets, g.num_nodes)
    # BFS from the smaller side; distances are symmetric on undirected graphs
    if targets.size < sources.size:
        dist = shortest_path_lengths(g, targets)[:, sources].T
    else:
        dist = shortest_path_lengths(g, sources)[:, targets]
    values = np.exp(-lambda_sp * dist)  # exp(-inf) == 0 for unreachable pairs
    return KernelSlice(sources, targets, values)


def interpolated_ppr(g: Graph, alpha: float, steps: int, lambda_mix: float,
                     sources, targets) -> KernelSlice:
    if not 0.0 <= lambda_mix <= 1.0:
        raise ValueError(f"lambda_mix must lie in [0, 1], got {lambda_mix}")
    ppr = ppr_kernel(g, alpha, steps, sources, targets)
    return KernelSlice(ppr.sources, ppr.targets, lambda_mix * ppr.values + (1.0 - lambda_mix))


def constant_kernel(g: Graph, sources, targets) -> KernelSlice:
    sources = _ids(sources, g.num_nodes)
    targets = _ids(targets, g.num_nodes)
    return KernelSlice(sources, targets, np.ones((sources.size, targets.size)))

