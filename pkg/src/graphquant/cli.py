"""Command-line entry point: ``graphquant {split,train,sample,quantify,bench,report}``.

Every command reads a JSON config (``--config``) plus files named on the
command line, and writes files or stdout; nothing is carried between
invocations. Failures print one line ``error: <key>: <message>`` to stderr and
exit with status 2.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import bench
from . import classifier as clf
from . import quantifiers as qf
from .graph import Split, make_split
from .metrics import rank_and_test
from .samplers import SamplePlan, draw_samples, load_samples, save_samples
from .sis import class_weights, density_ratio


class CliError(Exception):
    def __init__(self, key: str, message: str):
        super().__init__(message)
        self.key = key


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise CliError("config", f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise CliError("config", f"invalid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise CliError("config", "top level must be an object")
    return cfg


def _master_seed(args, cfg) -> int:
    if args.seed is not None:
        return args.seed
    if "seed" in cfg:
        return int(cfg["seed"])
    env = os.environ.get("GQ_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise CliError("GQ_SEED", f"not an integer: {env!r}") from None
    return 0


def _apply_overrides(args, cfg: dict) -> dict:
    cfg = json.loads(json.dumps(cfg))
    cfg["seed"] = _master_seed(args, cfg)
    quants = cfg.get("quantifiers", [])
    if getattr(args, "quantifier", None):
        wanted = set(args.quantifier.split(","))
        quants = [q for q in quants if bench.quantifier_name(q) in wanted or q.get("kind") in wanted]
        if not quants:
            quants = [{"kind": k} for k in sorted(wanted)]
    for q in quants:
        if args.sigma is not None and q.get("kind") == "kdey":
            q["sigma"] = args.sigma
        if args.lambda_mix is not None and q.get("sis"):
            sis = q["sis"].get("q_kernel", q["sis"])
            sis["lambda_mix"] = args.lambda_mix
    if quants:
        cfg["quantifiers"] = quants
    if getattr(args, "shift", None):
        shifts = [s for s in cfg.get("shifts", []) if s.get("protocol") == args.shift]
        cfg["shifts"] = shifts or [{"protocol": args.shift}]
    return cfg


def _graph(cfg):
    if "graph" in cfg:
        ds = cfg["graph"]
    elif cfg.get("datasets"):
        ds = cfg["datasets"][0]
    else:
        raise CliError("graph", "config needs a 'graph' or 'datasets' entry")
    return bench.load_dataset(ds)


def _write(out, text: str) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _need(path, key):
    if path is None:
        raise CliError(key, "required")
    if not Path(path).exists():
        raise CliError(key, f"file not found: {path}")
    return path


# --
# Commands


def cmd_split(args, cfg):
    g = _graph(cfg)
    ratios = cfg.get("split", {}).get("ratios", (0.05, 0.15, 0.80))
    split = make_split(g, ratios, bench.split_seeds(cfg)[0])
    _write(args.out, json.dumps(split.to_json()) + "\n")


def cmd_train(args, cfg):
    g = _graph(cfg)
    split = Split.load(_need(args.split, "split"))
    c = cfg.get("classifier", {"kind": "logistic"})
    if c.get("kind", "logistic") != "logistic":
        raise CliError("classifier.kind", "train supports the built-in 'logistic' classifier only")
    seed = bench.classifier_seeds(cfg)[0]
    prop = c.get("propagation")
    model = clf.fit(g, split.classifier_train, learning_rate=c.get("learning_rate", 0.5),
                    epochs=c.get("epochs", 300), l2=c.get("l2", 1e-3),
                    propagation=tuple(prop) if prop else None, seed=seed)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    model.save(out / "model.json")
    clf.save_posteriors(out / "posteriors.csv", clf.predict_proba(model, g))


def cmd_sample(args, cfg):
    g = _graph(cfg)
    split = Split.load(_need(args.split, "split"))
    shifts = cfg.get("shifts") or [{"protocol": "pps"}]
    plan_cfg = dict(shifts[0])
    if args.seed is not None or "seed" not in plan_cfg:
        plan_cfg["seed"] = cfg["seed"]
    samples = draw_samples(g, split.quantifier_test_pool, SamplePlan.from_config(plan_cfg))
    if args.out is None:
        sys.stdout.write(json.dumps([s.to_json() for s in samples]) + "\n")
    else:
        save_samples(args.out, samples)


def _quantify_one(q_cfg, p_train, y_train, p_test, k, sis=None):
    opts = {kk: v for kk, v in q_cfg.items() if kk not in ("kind", "name", "sis")}
    return qf.make_quantifier(q_cfg["kind"], p_train, y_train, opts, sis, k).quantify(p_test)


def cmd_quantify(args, cfg):
    quants = cfg.get("quantifiers") or [{"kind": "pcc"}]
    posteriors = clf.load_posteriors(_need(args.posteriors, "posteriors"))
    k = posteriors.shape[1]

    if args.samples is None:
        # direct mode: every row of --posteriors is a test row
        if args.train_posteriors:
            p_train = clf.load_posteriors(_need(args.train_posteriors, "train-posteriors"), k)
            y_train = np.loadtxt(_need(args.train_labels, "train-labels"), dtype=np.int64, ndmin=1)
        else:
            p_train, y_train = np.eye(k), np.arange(k)
        out = {}
        for q in quants:
            if q.get("sis"):
                raise CliError("quantifiers.sis", "SIS needs --samples and --split")
            needs_train = q["kind"] not in ("cc", "pcc")
            if needs_train and not args.train_posteriors:
                raise CliError("train-posteriors", f"required by quantifier {q['kind']!r}")
            out[bench.quantifier_name(q)] = _quantify_one(q, p_train, y_train, posteriors, k).tolist()
        _write(args.out, json.dumps(out) + "\n")
        return

    g = _graph(cfg)
    if posteriors.shape[0] != g.num_nodes:
        raise CliError("posteriors", f"{posteriors.shape[0]} rows for {g.num_nodes} nodes")
    split = Split.load(_need(args.split, "split"))
    samples = load_samples(_need(args.samples, "samples"))
    train = split.quantifier_train
    y_train = g.labels[train]
    records = []
    for sid, s in enumerate(samples):
        est = {}
        for q in quants:
            sis = None
            if q.get("sis"):
                qk, pk, floor = bench.sis_kernels(q["sis"])
                sis = class_weights(density_ratio(g, train, s.nodes, qk, pk, floor))
            est[bench.quantifier_name(q)] = _quantify_one(q, posteriors[train], y_train,
                                                           posteriors[s.nodes], k, sis).tolist()
        records.append({"sample_id": sid, "true_prevalence": s.true_prevalence.tolist(), "estimates": est})
    _write(args.out, json.dumps(records) + "\n")


def cmd_bench(args, cfg):
    results, failures = bench.run_benchmark(cfg, jobs=args.jobs, return_failures=True)
    out = args.out or cfg.get("output")
    if out is None:
        sys.stdout.write(bench.results_csv(results))
    else:
        bench.write_results(out, results)
        print(f"{len(results)} trials", file=sys.stderr)
    for f in failures:
        print(f"failed trial {f.key}: {f.error}", file=sys.stderr)


def cmd_report(args, cfg):
    results = bench.read_results(_need(args.results, "results"))
    if not results:
        raise CliError("results", "no trials")
    table = rank_and_test(results)
    if args.out is None:
        sys.stdout.write(table.wide().to_csv(index=False, float_format="%.6g"))
    else:
        table.to_csv(args.out)


COMMANDS = {"split": cmd_split, "train": cmd_train, "sample": cmd_sample, "quantify": cmd_quantify,
            "bench": cmd_bench, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="master seed (falls back to config, then $GQ_SEED)")
    common.add_argument("--out", help="output path")
    common.add_argument("--quantifier", help="comma-separated quantifier names or kinds to run")
    common.add_argument("--shift", choices=("pps", "rw", "bfs"), help="restrict to one shift protocol")
    common.add_argument("--sigma", type=float, help="KDEy bandwidth")
    common.add_argument("--lambda-mix", type=float, dest="lambda_mix", help="SIS kernel interpolation weight")

    parser = argparse.ArgumentParser(prog="graphquant", description="Prevalence estimation on graph nodes.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("split", parents=[common], help="write a random node split")
    p = sub.add_parser("train", parents=[common], help="fit the logistic classifier, write posteriors")
    p.add_argument("--split")
    p = sub.add_parser("sample", parents=[common], help="draw shifted test samples")
    p.add_argument("--split")
    p = sub.add_parser("quantify", parents=[common], help="estimate prevalences")
    p.add_argument("--posteriors")
    p.add_argument("--train-posteriors", dest="train_posteriors")
    p.add_argument("--train-labels", dest="train_labels")
    p.add_argument("--split")
    p.add_argument("--samples")
    p = sub.add_parser("bench", parents=[common], help="run the full benchmark, write results CSV")
    p.add_argument("--jobs", type=int, default=1)
    p = sub.add_parser("report", parents=[common], help="rank table from a results CSV")
    p.add_argument("--results")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(args, _load_config(args.config))
        COMMANDS[args.command](args, cfg)
    except CliError as exc:
        print(f"error: {exc.key}: {exc}", file=sys.stderr)
        return 2
    except KeyError as exc:
        print(f"error: {exc.args[0]}: missing key", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        msg = " ".join(str(exc).split())
        print(f"error: {args.command}: {msg}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
