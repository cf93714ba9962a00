"""Aggregative prevalence estimators over classifier posteriors.

Every adjusted estimator rests on the same mixture identity: the test
distribution of classifier outputs is a prevalence-weighted mixture of the
class-conditional output distributions observed on labelled data. The
estimators differ in how those distributions are summarized (confusion
matrix, histograms, kernel density) and how the mixture weights are solved for.

Degenerate inputs (unidentifiable mixtures, underflowing densities) never
raise; they emit :class:`UnidentifiableWarning` or
:class:`DensityFloorWarning` and still return a point on the simplex.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import logsumexp

from .simplex import clean, project_simplex, uniform

DENSITY_FLOOR = 1e-300


class UnidentifiableWarning(UserWarning):
    """The class-conditional summaries do not determine the prevalence."""


class DensityFloorWarning(UserWarning):
    """All mixture densities vanished at some test point; a floor was used."""


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 1000
    tol: float = 1e-10
    seed: int = 0
    grid: int = 1000
    mc_draws: int = 0

    def __post_init__(self):
        if self.max_iters < 1 or self.tol <= 0 or self.grid < 1:
            raise ValueError("max_iters, tol and grid must be positive")

    @classmethod
    def from_config(cls, cfg: Optional[dict]) -> "SolverConfig":
        cfg = dict(cfg or {})
        if "tol" in cfg:
            cfg["tol"] = float(cfg["tol"])
        extra = set(cfg) - {"max_iters", "tol", "seed", "grid", "mc_draws"}
        if extra:
            raise ValueError(f"unknown solver config keys {sorted(extra)}")
        return cls(**cfg)


# --
# Input checks


def _posteriors(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] == 0:
        raise ValueError(f"expected a non-empty (n, K) posterior matrix, got shape {p.shape}")
    return p


def _training(posteriors, labels, num_classes=None):
    p = _posteriors(posteriors)
    y = np.asarray(labels, dtype=np.int64)
    if y.shape != (p.shape[0],):
        raise ValueError("labels must align with posterior rows")
    k = p.shape[1] if num_classes is None else num_classes
    counts = np.bincount(y, minlength=k)
    if counts.size > k:
        raise ValueError(f"label {int(y.max())} out of range for K={k}")
    if np.any(counts == 0):
        raise ValueError(f"classes {np.flatnonzero(counts == 0).tolist()} missing from training data")
    return p, y, k


def _instance_weights(weights, y, k) -> np.ndarray:
    """Per-instance weights summing to one within every class."""
    if weights is None:
        counts = np.bincount(y, minlength=k)
        return 1.0 / counts[y]
    w = np.asarray(getattr(weights, "weights", weights), dtype=np.float64)
    if w.shape != y.shape:
        raise ValueError("weights must align with training rows")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and non-negative")
    sums = np.bincount(y, weights=w, minlength=k)
    if np.any(sums <= 0):
        raise ValueError(f"classes {np.flatnonzero(sums <= 0).tolist()} have zero total weight")
    return w / sums[y]


# --
# Unadjusted counting


def cc(hard_predictions, num_classes: int) -> np.ndarray:
    """Relative frequencies of predicted labels."""
    h = np.asarray(hard_predictions, dtype=np.int64)
    if h.size == 0:
        raise ValueError("no predictions")
    return np.bincount(h, minlength=num_classes)[:num_classes] / h.size


def pcc(posteriors) -> np.ndarray:
    """Mean posterior vector."""
    return _posteriors(posteriors).mean(axis=0)


def hard_predictions(posteriors) -> np.ndarray:
    """Argmax labels; ties go to the lowest class id."""
    return np.argmax(_posteriors(posteriors), axis=1)


# --
# Simplex-constrained solvers


def projected_gradient(fun: Callable, grad: Callable, q0, max_iters: int = 5000, tol: float = 1e-12):
    """Minimize a smooth convex ``fun`` over the simplex.

    Barzilai-Borwein step sizes with Armijo backtracking along the projection
    arc; monotone and deterministic. Returns ``(q, fun(q))``.
    """
    q = project_simplex(q0)
    fq = fun(q)
    gq = grad(q)
    step = 1.0
    for _ in range(max_iters):
        while True:
            cand = project_simplex(q - step * gq)
            d = cand - q
            fc = fun(cand)
            if fc <= fq + 1e-4 * gq @ d or step < 1e-20:
                break
            step *= 0.5
        if fc > fq:
            break
        gc = grad(cand)
        s, yk = cand - q, gc - gq
        q, fq, gq = cand, fc, gc
        if np.max(np.abs(s)) < tol:
            break
        sy = s @ yk
        step = (s @ s) / sy if sy > 0 else 1.0
        step = min(max(step, 1e-12), 1e12)
    return q, fq


def simplex_least_squares(a, b, max_iters: int = 20000, tol: float = 1e-14) -> np.ndarray:
    """``argmin_{q in simplex} 0.5 * ||a q - b||^2`` by projected gradient."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ata, atb = a.T @ a, a.T @ b

    def fun(q):
        r = a @ q - b
        return 0.5 * r @ r

    q, _ = projected_gradient(fun, lambda q: ata @ q - atb, uniform(a.shape[1]), max_iters, tol)
    return clean(q)


def acc_adjust(confusion, observed, max_iters: int = 20000, tol: float = 1e-14) -> np.ndarray:
    """Solve ``confusion @ q = observed`` over the simplex in the least-squares sense.

    ``confusion[j, i]`` is the probability of predicting ``j`` for class
    ``i``. A rank-deficient matrix emits :class:`UnidentifiableWarning`; the
    returned point is still a minimizer.
    """
    m = np.asarray(confusion, dtype=np.float64)
    obs = np.asarray(observed, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != obs.size:
        raise ValueError(f"confusion shape {m.shape} does not match observed length {obs.size}")
    if np.linalg.matrix_rank(m) < m.shape[1]:
        warnings.warn("confusion matrix is singular; prevalence not identifiable",
                      UnidentifiableWarning, stacklevel=2)
    return simplex_least_squares(m, obs, max_iters, tol)


def confusion_matrix(hard, labels, num_classes: int, weights=None) -> np.ndarray:
    """Column-conditional ``P(Yhat = j | Y = i)`` (columns sum to one)."""
    onehot = np.eye(num_classes)[np.asarray(hard, dtype=np.int64)]
    return soft_confusion(onehot, labels, num_classes, weights)


def soft_confusion(posteriors, labels, num_classes: int, weights=None) -> np.ndarray:
    """``M[j, i]`` = (weighted) mean of the ``j``-th posterior over class ``i``."""
    p, y, k = _training(posteriors, labels, num_classes)
    w = _instance_weights(weights, y, k)
    m = np.zeros((p.shape[1], k))
    for i in range(k):
        idx = y == i
        m[:, i] = w[idx] @ p[idx]
    return m


# --
# Hellinger distance and histogram matching


def hellinger(p, q) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"histogram length mismatch: {p.shape} vs {q.shape}")
    return float(np.linalg.norm(np.sqrt(p) - np.sqrt(q)) / np.sqrt(2.0))


def histogram(scores, bins: int, weights=None) -> np.ndarray:
    """Normalized equal-width histogram of scores in [0, 1]."""
    h, _ = np.histogram(np.clip(scores, 0.0, 1.0), bins=bins, range=(0.0, 1.0), weights=weights)
    return h / h.sum()


def hdy_binary(posteriors_train, labels_train, posteriors_test, bins: int = 8, grid: int = 1000) -> np.ndarray:
    """Binary HDy: grid search for the positive-class (class 1) mixture weight.

    Ties go to the smallest weight; equal class histograms emit
    :class:`UnidentifiableWarning` and yield weight 0.
    """
    p, y, k = _training(posteriors_train, labels_train)
    if k != 2:
        raise ValueError(f"hdy_binary needs K=2, got K={k}")
    test = _posteriors(posteriors_test)
    pos = histogram(p[y == 1, 1], bins)
    neg = histogram(p[y == 0, 1], bins)
    target = histogram(test[:, 1], bins)
    if np.allclose(pos, neg, rtol=0, atol=1e-12):
        warnings.warn("class histograms coincide; prevalence not identifiable",
                      UnidentifiableWarning, stacklevel=2)
        return np.array([1.0, 0.0])
    alphas = np.linspace(0.0, 1.0, grid + 1)
    mix = alphas[:, None] * pos + (1.0 - alphas[:, None]) * neg
    hd = np.linalg.norm(np.sqrt(mix) - np.sqrt(target), axis=1) / np.sqrt(2.0)
    best = np.flatnonzero(hd <= hd.min() + 1e-12)[0]
    a = alphas[best]
    return np.array([1.0 - a, a])


def class_histograms(posteriors, labels, num_classes, bins: int, weights=None) -> np.ndarray:
    """Array ``h[i, j]`` = histogram of posterior dimension ``j`` over class ``i``."""
    p, y, k = _training(posteriors, labels, num_classes)
    w = _instance_weights(weights, y, k)
    out = np.zeros((k, p.shape[1], bins))
    for i in range(k):
        idx = y == i
        for j in range(p.shape[1]):
            out[i, j] = histogram(p[idx, j], bins, w[idx])
    return out


def aggregate_histograms(h: np.ndarray, aggregation: str) -> np.ndarray:
    """Combine per-dimension histograms ``h[..., j, :]`` into one histogram.

    ``concat`` stacks the ``K`` histograms and divides by ``K``; ``average``
    takes their mean bin-wise.
    """
    kdim = h.shape[-2]
    if aggregation == "concat":
        return h.reshape(*h.shape[:-2], -1) / kdim
    if aggregation == "average":
        return h.mean(axis=-2)
    raise ValueError(f"unknown aggregation {aggregation!r}; expected 'concat' or 'average'")


def hellinger_mixture_solve(components: np.ndarray, target: np.ndarray, max_iters: int = 5000,
                            tol: float = 1e-12) -> np.ndarray:
    """``argmin_q HD(sum_i q_i components[i], target)`` over the simplex.

    Uses ``HD^2 = 1 - sum_b sqrt(mix_b * target_b)`` for normalized inputs,
    which is convex in ``q``.
    """
    comp = np.asarray(components, dtype=np.float64)
    sq_target = np.sqrt(target)

    def fun(q):
        return 1.0 - sq_target @ np.sqrt(np.maximum(q @ comp, 0.0))

    def grad(q):
        # floored so that target mass on an empty mixture bin gives a steep, finite pull
        mix = np.maximum(q @ comp, 1e-12)
        return -(comp @ (sq_target / (2.0 * np.sqrt(mix))))

    q, _ = projected_gradient(fun, grad, uniform(comp.shape[0]), max_iters, tol)
    return clean(q)


def dm_histogram_multiclass(posteriors_train, labels_train, posteriors_test, bins: int = 8,
                            aggregation: str = "concat", weights=None, max_iters: int = 5000,
                            tol: float = 1e-12) -> np.ndarray:
    """Multi-class histogram distribution matching under the Hellinger distance."""
    return DMHistogram.fit(posteriors_train, labels_train, bins=bins, aggregation=aggregation,
                           weights=weights).quantify(posteriors_test, max_iters=max_iters, tol=tol)


# --
# Kernel density estimation on the simplex


def gaussian_log_kernel(x, centers, sigma: float) -> np.ndarray:
    """Log of the isotropic Gaussian kernel in the ambient ``K``-dim space, ``(n, m)``."""
    d2 = (np.sum(x**2, axis=1)[:, None] + np.sum(centers**2, axis=1)[None, :] - 2.0 * x @ centers.T)
    d2 = np.maximum(d2, 0.0)
    k = x.shape[1]
    return -d2 / (2.0 * sigma**2) - 0.5 * k * np.log(2.0 * np.pi) - k * np.log(sigma)


# --
# Fitted quantifiers


class Quantifier:
    """Base class; subclasses implement :meth:`quantify`."""

    kind = "base"
    num_classes: int

    def quantify(self, posteriors_test) -> np.ndarray:
        raise NotImplementedError


@dataclass
class CC(Quantifier):
    num_classes: int
    kind = "cc"

    def quantify(self, posteriors_test):
        return cc(hard_predictions(posteriors_test), self.num_classes)


@dataclass
class PCC(Quantifier):
    num_classes: int
    kind = "pcc"

    def quantify(self, posteriors_test):
        return pcc(posteriors_test)


@dataclass
class ACC(Quantifier):
    confusion: np.ndarray
    kind = "acc"

    @property
    def num_classes(self):
        return self.confusion.shape[1]

    @classmethod
    def fit(cls, posteriors_train, labels_train, num_classes=None) -> "ACC":
        p, y, k = _training(posteriors_train, labels_train, num_classes)
        return cls(confusion_matrix(hard_predictions(p), y, k))

    def quantify(self, posteriors_test):
        return acc_adjust(self.confusion, cc(hard_predictions(posteriors_test), self.num_classes))


@dataclass
class PACC(Quantifier):
    confusion: np.ndarray
    weighted: bool = False
    kind = "pacc"

    @property
    def num_classes(self):
        return self.confusion.shape[1]

    @classmethod
    def fit(cls, posteriors_train, labels_train, weights=None, num_classes=None) -> "PACC":
        p, y, k = _training(posteriors_train, labels_train, num_classes)
        return cls(soft_confusion(p, y, k, weights), weights is not None)

    def quantify(self, posteriors_test):
        return acc_adjust(self.confusion, pcc(posteriors_test))


@dataclass
class HDy(Quantifier):
    posteriors_train: np.ndarray
    labels_train: np.ndarray
    bins: int = 8
    grid: int = 1000
    num_classes: int = 2
    kind = "hdy"

    @classmethod
    def fit(cls, posteriors_train, labels_train, bins=8, grid=1000) -> "HDy":
        p, y, k = _training(posteriors_train, labels_train)
        if k != 2:
            raise ValueError(f"HDy needs K=2, got K={k}")
        return cls(p, y, bins, grid)

    def quantify(self, posteriors_test):
        return hdy_binary(self.posteriors_train, self.labels_train, posteriors_test, self.bins, self.grid)


@dataclass
class DMHistogram(Quantifier):
    """Per-class, per-dimension histograms ``class_hists[i, j]``."""

    class_hists: np.ndarray
    bins: int = 8
    aggregation: str = "concat"
    kind = "dm"

    @property
    def num_classes(self):
        return self.class_hists.shape[0]

    @classmethod
    def fit(cls, posteriors_train, labels_train, bins=8, aggregation="concat", weights=None,
            num_classes=None) -> "DMHistogram":
        p, y, k = _training(posteriors_train, labels_train, num_classes)
        if k < 2:
            raise ValueError("need at least two classes")
        aggregate_histograms(np.zeros((1, 1, 1)), aggregation)  # validate early
        return cls(class_histograms(p, y, k, bins, weights), bins, aggregation)

    @property
    def components(self) -> np.ndarray:
        return aggregate_histograms(self.class_hists, self.aggregation)

    def quantify(self, posteriors_test, max_iters: int = 5000, tol: float = 1e-12):
        test = _posteriors(posteriors_test)
        comp = self.components
        if np.allclose(comp, comp[0], rtol=0, atol=1e-12):
            warnings.warn("class histograms coincide; returning uniform prevalence",
                          UnidentifiableWarning, stacklevel=2)
            return uniform(self.num_classes)
        hists = np.stack([histogram(test[:, j], self.bins) for j in range(test.shape[1])])
        target = aggregate_histograms(hists, self.aggregation)
        return hellinger_mixture_solve(comp, target, max_iters, tol)


@dataclass
class KDEyML(Quantifier):
    """Per-class posterior banks with instance weights and a shared bandwidth.

    The class-conditional density of a posterior vector is the weighted
    Gaussian mixture over its class bank; with uniform weights this is the
    ordinary kernel density estimate.
    """

    banks: list
    bank_weights: list
    sigma: float = 0.1
    solver: SolverConfig = field(default_factory=SolverConfig)
    weighted: bool = False
    kind = "kdey"

    @property
    def num_classes(self):
        return len(self.banks)

    def log_densities(self, s) -> np.ndarray:
        """``log p(s | i)`` for every row of ``s`` and class ``i``, shape ``(n, K)``."""
        s = _posteriors(s)
        out = np.empty((s.shape[0], self.num_classes))
        with np.errstate(divide="ignore"):
            for i, (bank, w) in enumerate(zip(self.banks, self.bank_weights)):
                out[:, i] = logsumexp(gaussian_log_kernel(s, bank, self.sigma) + np.log(w), axis=1)
        return out

    def densities(self, s) -> np.ndarray:
        return np.exp(self.log_densities(s))

    def quantify(self, posteriors_test):
        return kdey_ml_solve(self, posteriors_test, self.solver)


def kdey_fit(posteriors_train, labels_train, sigma: float = 0.1, weights=None, num_classes=None,
             solver: Optional[SolverConfig] = None) -> KDEyML:
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    p, y, k = _training(posteriors_train, labels_train, num_classes)
    w = _instance_weights(weights, y, k)
    banks = [p[y == i].copy() for i in range(k)]
    bank_weights = [w[y == i].copy() for i in range(k)]
    return KDEyML(banks, bank_weights, float(sigma), solver or SolverConfig(), weights is not None)


def _scaled_densities(fq: KDEyML, posteriors_test):
    """Row-rescaled densities ``exp(logD - rowmax)`` and the row maxima."""
    logd = fq.log_densities(posteriors_test)
    rowmax = logd.max(axis=1)
    # every class density below the floor: the floored inner sum is flat in q
    dead = ~(rowmax >= np.log(DENSITY_FLOOR))
    if dead.any():
        warnings.warn(f"{int(dead.sum())} test points have zero density under every class; "
                      "using a density floor", DensityFloorWarning, stacklevel=3)
        logd[dead] = np.log(DENSITY_FLOOR)
        rowmax[dead] = np.log(DENSITY_FLOOR)
    return np.exp(logd - rowmax[:, None]), rowmax


def kdey_objective(fq: KDEyML, posteriors_test, q) -> float:
    """Negative log-likelihood ``-sum_x log sum_i q_i p(h(x) | i)``."""
    d, rowmax = _scaled_densities(fq, posteriors_test)
    # exactly rounded sums keep successive objective values comparable
    return -math.fsum(rowmax) - math.fsum(np.log(d @ np.asarray(q)))


def kdey_ml_solve(fq: KDEyML, posteriors_test, cfg: Optional[SolverConfig] = None, *, method: str = "em",
                  trace: Optional[list] = None) -> np.ndarray:
    """Maximum-likelihood mixture proportions for the test posteriors.

    ``method="em"`` runs the fixed-point update on the mixture proportions
    from the uniform start; ``method="pg"`` runs projected gradient on the
    same objective. Objective values per iteration are appended to ``trace``.
    """
    if method not in ("em", "pg"):
        raise ValueError(f"unknown method {method!r}; expected 'em' or 'pg'")
    cfg = cfg or fq.solver
    d, rowmax = _scaled_densities(fq, posteriors_test)
    k = fq.num_classes
    offset = -math.fsum(rowmax)

    if np.allclose(d, d[:, :1], rtol=1e-12, atol=0):
        warnings.warn("class-conditional densities coincide on the test sample; returning uniform",
                      UnidentifiableWarning, stacklevel=2)
        return uniform(k)

    def fun(q):
        return offset - math.fsum(np.log(d @ q))

    q = uniform(k)
    if method == "em":
        if trace is not None:
            trace.append(fun(q))
        for _ in range(cfg.max_iters):
            mix = d @ q
            q_new = q * (d.T @ (1.0 / mix)) / d.shape[0]
            q_new /= q_new.sum()
            delta = np.max(np.abs(q_new - q))
            q = q_new
            if trace is not None:
                trace.append(fun(q))
            if delta < cfg.tol:
                break
    else:
        n = d.shape[0]

        def fun_mean(q):
            mix = d @ q
            return np.inf if np.any(mix <= 0) else -np.mean(np.log(mix))

        def grad_mean(q):
            return -(d.T @ (1.0 / np.maximum(d @ q, DENSITY_FLOOR))) / n

        q, _ = projected_gradient(fun_mean, grad_mean, q, max_iters=max(cfg.max_iters, 5000), tol=1e-14)
        if trace is not None:
            trace.append(fun(q))
    return clean(q)


# --
# Factory

KINDS = ("cc", "pcc", "acc", "pacc", "hdy", "dm", "kdey")
WEIGHTED_KINDS = ("pacc", "kdey")


def make_quantifier(kind: str, posteriors_train, labels_train, options: Optional[dict] = None,
                    sis=None, num_classes: Optional[int] = None) -> Quantifier:
    """Fit the quantifier ``kind`` on labelled training posteriors.

    ``options`` may hold ``sigma``, ``bins``, ``aggregation`` and ``solver``
    (a :class:`SolverConfig` mapping). ``sis`` carries instance weights
    (:class:`~graphquant.sis.SisWeights`, :class:`~graphquant.sis.ClassWeights`
    or an array aligned with the training rows) and is accepted by ``pacc``
    and ``kdey`` only.
    """
    options = dict(options or {})
    if kind not in KINDS:
        raise ValueError(f"unknown quantifier kind {kind!r}; expected one of {KINDS}")
    if sis is not None and kind not in WEIGHTED_KINDS:
        raise ValueError(f"quantifier {kind!r} does not accept SIS weights")
    weights = sis
    if sis is not None and hasattr(sis, "rho"):
        from .sis import class_weights
        weights = class_weights(sis)
    solver = SolverConfig.from_config(options.get("solver"))
    bins = int(options.get("bins", 8))

    p, y, k = _training(posteriors_train, labels_train, num_classes)
    if kind == "cc":
        return CC(k)
    if kind == "pcc":
        return PCC(k)
    if kind == "acc":
        return ACC.fit(p, y, k)
    if kind == "pacc":
        return PACC.fit(p, y, weights, k)
    if kind == "hdy":
        return HDy.fit(p, y, bins, solver.grid)
    if kind == "dm":
        return DMHistogram.fit(p, y, bins, options.get("aggregation", "concat"), num_classes=k)
    return kdey_fit(p, y, float(options.get("sigma", 0.1)), weights, k, solver)
