"""Helpers for points on the probability simplex."""

import numpy as np

PREVALENCE_ATOL = 1e-9


def project_simplex(v):
    """Euclidean projection of ``v`` onto the probability simplex.

    Sort-based algorithm (Held et al. / Duchi et al.), O(K log K).
    """
    v = np.asarray(v, dtype=np.float64)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = max(int(np.count_nonzero(u - css / idx > 0)), 1)
    theta = css[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


def uniform(k: int) -> np.ndarray:
    return np.full(k, 1.0 / k)


def as_prevalence(values, atol: float = PREVALENCE_ATOL) -> np.ndarray:
    """Validate ``values`` as a prevalence vector and return it as a float array."""
    q = np.asarray(values, dtype=np.float64)
    if q.ndim != 1 or q.size == 0:
        raise ValueError(f"prevalence must be a non-empty vector, got shape {q.shape}")
    if np.any(q < 0) or not np.all(np.isfinite(q)):
        raise ValueError(f"prevalence has negative or non-finite entries: {q}")
    if abs(q.sum() - 1.0) > atol:
        raise ValueError(f"prevalence sums to {q.sum()!r}")
    return q


def clean(q) -> np.ndarray:
    """Clip round-off negatives and renormalize."""
    q = np.maximum(np.asarray(q, dtype=np.float64), 0.0)
    return q / q.sum()
