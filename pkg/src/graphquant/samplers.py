"""Test-sample generators under prior-probability and structural covariate shift.

Three protocols draw node sets from the quantifier-test pool:

* ``pps``: Zipf-distributed target prevalences, nodes drawn uniformly per class;
* ``rw``: distinct pool nodes visited by teleporting random walks from a start vertex;
* ``bfs``: pool nodes in breadth-first order from a start vertex.

Walks and BFS traverse the whole graph but only collect pool members.
Each sample gets its own generator derived from ``(seed, label, start index)``,
so results do not depend on evaluation order.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.sparse.csgraph import connected_components

from .graph import Graph

PROTOCOLS = ("pps", "rw", "bfs")


@dataclass(frozen=True)
class SamplePlan:
    protocol: str = "pps"
    n: int = 100
    zipf_s: float = 1.0
    walk_len: int = 10
    teleport: float = 0.1
    per_label_starts: int = 10
    samples_per_class: int = 10
    max_walks: int = 10000
    seed: int = 0

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}; expected one of {PROTOCOLS}")
        if self.n < 1:
            raise ValueError("sample size n must be >= 1")
        if not self.zipf_s > 0:
            raise ValueError("zipf_s must be positive")
        if not 0.0 <= self.teleport <= 1.0:
            raise ValueError("teleport must lie in [0, 1]")

    @classmethod
    def from_config(cls, cfg: dict) -> "SamplePlan":
        extra = set(cfg) - set(cls.__dataclass_fields__)
        if extra:
            raise ValueError(f"unknown plan keys {sorted(extra)}")
        return cls(**cfg)

    def to_config(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TestSample:
    nodes: np.ndarray
    true_prevalence: np.ndarray
    protocol: str
    seed: int
    start: Optional[int] = None
    label: Optional[int] = None
    short: bool = False
    extra: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    def to_json(self) -> dict:
        out = {
            "nodes": [int(v) for v in self.nodes],
            "true_prevalence": [float(v) for v in self.true_prevalence],
            "protocol": self.protocol,
            "seed": int(self.seed),
            "start": None if self.start is None else int(self.start),
            "label": None if self.label is None else int(self.label),
            "short": bool(self.short),
        }
        if self.extra:
            out["extra"] = self.extra
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "TestSample":
        return cls(np.asarray(obj["nodes"], dtype=np.int64), np.asarray(obj["true_prevalence"]),
                   obj["protocol"], obj["seed"], obj.get("start"), obj.get("label"),
                   obj.get("short", False), obj.get("extra", {}))


def save_samples(path, samples) -> None:
    Path(path).write_text(json.dumps([s.to_json() for s in samples]) + "\n", encoding="utf-8")


def load_samples(path) -> list:
    return [TestSample.from_json(o) for o in json.loads(Path(path).read_text(encoding="utf-8"))]


def _rng(*key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in key]))


def realized_prevalence(labels, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    return np.bincount(labels, minlength=num_classes) / labels.size


# --
# Prior probability shift


def zipf_weights(k: int, s: float = 1.0) -> np.ndarray:
    """Normalized ``rank^-s`` for ranks ``1..k``."""
    w = np.arange(1, k + 1, dtype=np.float64) ** (-float(s))
    return w / w.sum()


def zipf_prevalence(k: int, s: float, rng: np.random.Generator) -> np.ndarray:
    """Zipf weights assigned to labels by a uniformly random permutation."""
    if not s > 0:
        raise ValueError("s must be positive")
    return zipf_weights(k, s)[rng.permutation(k)]


def largest_remainder(n: int, q, capacity=None) -> np.ndarray:
    """Integer counts summing to ``n`` that round ``n * q``.

    With ``capacity``, classes are capped and the deficit is re-apportioned
    proportionally to ``q`` among classes with room left.
    """
    q = np.asarray(q, dtype=np.float64)
    cap = np.full(q.size, n, dtype=np.int64) if capacity is None else np.asarray(capacity, np.int64)
    if cap.sum() < n:
        raise ValueError(f"cannot draw {n} nodes from {int(cap.sum())} available")
    counts = np.zeros(q.size, dtype=np.int64)
    remaining = n
    open_ = cap > 0
    while remaining > 0:
        w = np.where(open_, q, 0.0)
        if w.sum() <= 0:
            w = open_.astype(np.float64)
        ideal = remaining * w / w.sum()
        add = np.floor(ideal + 1e-9).astype(np.int64)
        frac = np.where(open_, ideal - add, -1.0)
        order = np.argsort(-frac, kind="stable")
        add[order[:remaining - add.sum()]] += 1
        add = np.minimum(add, cap - counts)
        counts += add
        remaining = n - counts.sum()
        open_ = counts < cap
    return counts


def sample_pps(g: Graph, pool, plan: SamplePlan) -> list:
    """``samples_per_class * K`` samples with Zipf prevalences drawn per sample."""
    pool = np.asarray(pool, dtype=np.int64)
    if pool.size == 0:
        raise ValueError("empty test pool")
    if plan.n > pool.size:
        raise ValueError(f"sample size {plan.n} exceeds pool size {pool.size}")
    k = g.num_classes
    by_class = [pool[g.labels[pool] == i] for i in range(k)]
    avail = np.array([c.size for c in by_class])
    out = []
    for idx in range(plan.samples_per_class * k):
        rng = _rng(plan.seed, idx)
        q = zipf_prevalence(k, plan.zipf_s, rng)
        counts = largest_remainder(plan.n, q, avail)
        nodes = np.concatenate([rng.choice(by_class[i], size=counts[i], replace=False)
                                for i in range(k)])
        out.append(TestSample(np.sort(nodes), counts / plan.n, "pps", plan.seed,
                              extra={"target_prevalence": q.tolist()}))
    return out


# --
# Structural covariate shift


def _start_vertices(g: Graph, pool, plan: SamplePlan):
    """``per_label_starts`` pool vertices per label, uniformly at random."""
    starts = []
    for label in range(g.num_classes):
        cand = pool[g.labels[pool] == label]
        if cand.size == 0:
            raise ValueError(f"no start vertex available for label {label}")
        rng = _rng(plan.seed, label)
        chosen = rng.choice(cand, size=min(plan.per_label_starts, cand.size), replace=False)
        starts.extend((label, j, int(v)) for j, v in enumerate(chosen))
    return starts


def _component_pool_size(g: Graph, pool_mask, start: int, comp_labels) -> int:
    return int(np.count_nonzero(pool_mask & (comp_labels == comp_labels[start])))


def random_walk_sample(g: Graph, start: int, n: int, pool_mask, rng: np.random.Generator,
                       walk_len: int = 10, teleport: float = 0.1, max_walks: int = 10000,
                       reachable: Optional[int] = None) -> list:
    """Distinct pool nodes in first-visit order from repeated teleporting walks."""
    target = n if reachable is None else min(n, reachable)
    indptr, indices = g.adjacency.indptr, g.adjacency.indices
    seen = set()
    order = []
    if pool_mask[start]:
        seen.add(start)
        order.append(start)
    walks = 0
    while len(order) < target and walks < max_walks:
        walks += 1
        cur = start
        for _ in range(walk_len):
            lo, hi = indptr[cur], indptr[cur + 1]
            if rng.random() < teleport or hi == lo:
                cur = start
            else:
                cur = int(indices[lo + rng.integers(hi - lo)])
            if pool_mask[cur] and cur not in seen:
                seen.add(cur)
                order.append(cur)
                if len(order) >= target:
                    break
    return order


def bfs_sample(g: Graph, start: int, n: int, pool_mask, rng: np.random.Generator) -> list:
    """Pool nodes by BFS layer from ``start``; random order inside a layer."""
    indptr, indices = g.adjacency.indptr, g.adjacency.indices
    visited = np.zeros(g.num_nodes, dtype=bool)
    visited[start] = True
    layer = [start]
    order = []
    while layer and len(order) < n:
        members = np.array(layer)
        members = members[pool_mask[members]]
        order.extend(int(v) for v in rng.permutation(members)[: n - len(order)])
        nxt = []
        for u in layer:
            for v in indices[indptr[u]:indptr[u + 1]]:
                if not visited[v]:
                    visited[v] = True
                    nxt.append(int(v))
        layer = sorted(nxt)
    return order


def _structural(g: Graph, pool, plan: SamplePlan, protocol: str) -> list:
    pool = np.asarray(pool, dtype=np.int64)
    if pool.size == 0:
        raise ValueError("empty test pool")
    pool_mask = np.zeros(g.num_nodes, dtype=bool)
    pool_mask[pool] = True
    _, comp = connected_components(g.adjacency, directed=False)
    out = []
    for label, j, start in _start_vertices(g, pool, plan):
        rng = _rng(plan.seed, label, j, 1)
        if protocol == "rw":
            reach = _component_pool_size(g, pool_mask, start, comp)
            nodes = random_walk_sample(g, start, plan.n, pool_mask, rng, plan.walk_len,
                                       plan.teleport, plan.max_walks, reach)
        else:
            nodes = bfs_sample(g, start, plan.n, pool_mask, rng)
        nodes = np.asarray(nodes, dtype=np.int64)
        out.append(TestSample(nodes, realized_prevalence(g.labels[nodes], g.num_classes), protocol,
                              plan.seed, start, label, short=nodes.size < plan.n))
    return out


def sample_rw(g: Graph, pool, plan: SamplePlan) -> list:
    return _structural(g, pool, plan, "rw")


def sample_bfs(g: Graph, pool, plan: SamplePlan) -> list:
    return _structural(g, pool, plan, "bfs")


def draw_samples(g: Graph, pool, plan: SamplePlan) -> list:
    if g.labels is None:
        raise ValueError("graph has no labels")
    return {"pps": sample_pps, "rw": sample_rw, "bfs": sample_bfs}[plan.protocol](g, pool, plan)
