"""Experiment loop: splits x classifier seeds x shift samples x quantifiers.

A run is described by a plain JSON-compatible dict::

    {
      "seed": 0,
      "datasets": [{"name": "cora", "edges": "...", "features": "...", "labels": "..."},
                   {"name": "clusters", "synthetic": {"n_nodes": 300, "seed": 0}}],
      "split": {"ratios": [0.05, 0.15, 0.8], "seeds": [0, 1]},
      "classifier": {"kind": "logistic", "propagation": [0.1, 10], "seeds": [0]},
      "quantifiers": [{"kind": "kdey", "sigma": 0.1,
                       "sis": {"kind": "interpolated-ppr", "lambda_mix": 0.9}}],
      "shifts": [{"protocol": "rw", "n": 100}]
    }

Every stochastic stage is seeded from the master seed, so results are a pure
function of the config and independent of the number of worker processes.
"""

from __future__ import annotations

import csv
import io
import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import classifier as clf
from . import quantifiers as qf
from .graph import Graph, load_graph, make_split
from .kernels import VertexKernel
from .metrics import ae, rae
from .samplers import SamplePlan, draw_samples
from .sis import DEFAULT_FLOOR, class_weights, density_ratio
from .synthetic import cluster_graph

log = logging.getLogger(__name__)

RESULT_FIELDS = ("dataset", "shift", "classifier", "quantifier", "split_seed", "clf_seed",
                 "sample_id", "ae", "rae", "flags")


@dataclass(frozen=True)
class TrialResult:
    dataset: str
    shift: str
    classifier: str
    quantifier: str
    split_seed: int
    clf_seed: int
    sample_id: int
    ae: float
    rae: float
    flags: str = ""

    @property
    def key(self):
        return (self.dataset, self.shift, self.classifier, self.quantifier, self.split_seed,
                self.clf_seed, self.sample_id)

    def to_row(self) -> dict:
        return {f: getattr(self, f) for f in RESULT_FIELDS}


@dataclass(frozen=True)
class TrialFailure:
    key: tuple
    error: str


def derive_seed(*key) -> int:
    return int(np.random.SeedSequence([int(k) for k in key]).generate_state(1)[0])


# --
# Config helpers


def dataset_name(cfg: dict, idx: int) -> str:
    return cfg.get("name", f"dataset{idx}")


def load_dataset(cfg: dict) -> Graph:
    if "synthetic" in cfg:
        return cluster_graph(**cfg["synthetic"])
    try:
        return load_graph(cfg["edges"], cfg.get("features"), cfg.get("labels"))
    except KeyError:
        raise ValueError("dataset config needs 'edges' or 'synthetic'") from None


def classifier_name(cfg: dict) -> str:
    if "name" in cfg:
        return cfg["name"]
    kind = cfg.get("kind", "logistic")
    return f"{kind}-ppr" if kind == "logistic" and cfg.get("propagation") else kind


def quantifier_name(cfg: dict) -> str:
    if "name" in cfg:
        return cfg["name"]
    return f"{cfg['kind']}-sis" if cfg.get("sis") else cfg["kind"]


def split_seeds(config: dict) -> list:
    split = config.get("split", {})
    if "seeds" in split:
        return [int(s) for s in split["seeds"]]
    master = int(config.get("seed", 0))
    return [derive_seed(master, 1, i) % 2**31 for i in range(int(split.get("num_splits", 1)))]


def classifier_seeds(config: dict) -> list:
    c = config.get("classifier", {})
    if "seeds" in c:
        return [int(s) for s in c["seeds"]]
    master = int(config.get("seed", 0))
    return [derive_seed(master, 2, i) % 2**31 for i in range(int(c.get("num_seeds", 1)))]


def sis_kernels(sis_cfg: dict):
    """``(q_kernel, p_kernel, floor)`` from a quantifier's ``sis`` block."""
    sis_cfg = dict(sis_cfg)
    floor = float(sis_cfg.pop("floor", DEFAULT_FLOOR))
    p_cfg = sis_cfg.pop("p_kernel", {"kind": "constant"})
    if "q_kernel" in sis_cfg:
        q_cfg = sis_cfg.pop("q_kernel")
        if sis_cfg:
            raise ValueError(f"unknown sis keys {sorted(sis_cfg)}")
    else:
        q_cfg = sis_cfg
    return VertexKernel.from_config(q_cfg), VertexKernel.from_config(p_cfg), floor


def posteriors_for(g: Graph, split, cfg: dict, seed: int) -> np.ndarray:
    """Posterior rows for every node, in node-id order."""
    kind = cfg.get("kind", "logistic")
    if kind == "logistic":
        prop = cfg.get("propagation")
        model = clf.fit(g, split.classifier_train, learning_rate=cfg.get("learning_rate", 0.5),
                        epochs=cfg.get("epochs", 300), l2=cfg.get("l2", 1e-3),
                        propagation=tuple(prop) if prop else None, seed=seed)
        return clf.predict_proba(model, g)
    if kind == "oracle":
        return clf.one_hot_posteriors(g.labels, g.num_classes)
    if kind == "posteriors":
        p = clf.load_posteriors(cfg["path"], g.num_classes)
        if p.shape[0] != g.num_nodes:
            raise ValueError(f"posterior file has {p.shape[0]} rows, graph has {g.num_nodes} nodes")
        return p
    raise ValueError(f"unknown classifier kind {kind!r}")


# --
# Trial execution


def _flag_string(caught, extra=()) -> str:
    names = {w.category.__name__ for w in caught} | set(extra)
    return ";".join(sorted(names))


def _run_unit(config: dict, ds_idx: int, split_seed: int, clf_seed: int):
    """All trials for one (dataset, split, classifier seed)."""
    ds_cfg = config["datasets"][ds_idx]
    ds = dataset_name(ds_cfg, ds_idx)
    master = int(config.get("seed", 0))
    g = load_dataset(ds_cfg)
    ratios = config.get("split", {}).get("ratios", (0.05, 0.15, 0.80))
    split = make_split(g, ratios, split_seed)
    clf_cfg = config.get("classifier", {})
    clf_label = classifier_name(clf_cfg)
    posteriors = posteriors_for(g, split, clf_cfg, clf_seed)

    train = split.quantifier_train
    y_train = g.labels[train]
    p_train = posteriors[train]
    quant_cfgs = config["quantifiers"]
    results, failures = [], []

    for shift_idx, plan_cfg in enumerate(config["shifts"]):
        plan_cfg = dict(plan_cfg)
        plan_cfg.setdefault("seed", derive_seed(master, 3, split_seed, shift_idx) % 2**31)
        plan = SamplePlan.from_config(plan_cfg)
        samples = draw_samples(g, split.quantifier_test_pool, plan)
        for sample_id, sample in enumerate(samples):
            p_test = posteriors[sample.nodes]
            weight_cache = {}
            for q_cfg in quant_cfgs:
                q_label = quantifier_name(q_cfg)
                key = (ds, plan.protocol, clf_label, q_label, split_seed, clf_seed, sample_id)
                extra = ["short_sample"] if sample.short else []
                try:
                    with warnings.catch_warnings(record=True) as caught:
                        warnings.simplefilter("always")
                        sis = None
                        if q_cfg.get("sis"):
                            ck = repr(sorted(q_cfg["sis"].items()))
                            if ck not in weight_cache:
                                qk, pk, floor = sis_kernels(q_cfg["sis"])
                                w = density_ratio(g, train, sample.nodes, qk, pk, floor)
                                weight_cache[ck] = class_weights(w)
                            sis = weight_cache[ck]
                            extra += [f"sis_fallback_{c}" for c in sis.fallback]
                        opts = {k: v for k, v in q_cfg.items() if k not in ("kind", "name", "sis")}
                        est = qf.make_quantifier(q_cfg["kind"], p_train, y_train, opts, sis,
                                                 g.num_classes).quantify(p_test)
                    truth = sample.true_prevalence
                    results.append(TrialResult(*key, ae(truth, est), rae(truth, est, sample.nodes.size),
                                               _flag_string(caught, extra)))
                except Exception as exc:  # failed trials are recorded, the run continues
                    log.warning("trial %s failed: %s", key, exc)
                    failures.append(TrialFailure(key, f"{type(exc).__name__}: {exc}"))
    return results, failures


def run_benchmark(config: dict, jobs: int = 1, return_failures: bool = False):
    """Run every trial described by ``config``; results sorted by trial key."""
    for required in ("datasets", "quantifiers", "shifts"):
        if not config.get(required):
            raise ValueError(f"config key {required!r} is missing or empty")
    units = [(config, d, s, c) for d in range(len(config["datasets"]))
             for s in split_seeds(config) for c in classifier_seeds(config)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outs = list(pool.map(_run_unit, *zip(*units)))
    else:
        outs = [_run_unit(*u) for u in units]
    results = sorted((r for res, _ in outs for r in res), key=lambda r: r.key)
    failures = [f for _, fail in outs for f in fail]
    return (results, failures) if return_failures else results


def results_csv(results) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RESULT_FIELDS)
    for r in results:
        writer.writerow([r.dataset, r.shift, r.classifier, r.quantifier, r.split_seed, r.clf_seed,
                         r.sample_id, repr(float(r.ae)), repr(float(r.rae)), r.flags])
    return buf.getvalue()


def write_results(path, results) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(results_csv(results))


def read_results(path) -> list:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(RESULT_FIELDS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"results file missing columns {sorted(missing)}")
        return [TrialResult(r["dataset"], r["shift"], r["classifier"], r["quantifier"], int(r["split_seed"]),
                            int(r["clf_seed"]), int(r["sample_id"]), float(r["ae"]), float(r["rae"]),
                            r["flags"] or "") for r in reader]
