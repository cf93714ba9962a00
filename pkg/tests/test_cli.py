import json

import numpy as np
import pytest

from graphquant.cli import main

CFG = {
    "seed": 0,
    "datasets": [{"name": "clusters", "synthetic": {"n_nodes": 150, "seed": 0}}],
    "split": {"seeds": [0]},
    "classifier": {"kind": "logistic", "propagation": [0.1, 10], "epochs": 50},
    "quantifiers": [{"kind": "pcc"}, {"kind": "pacc"},
                    {"kind": "kdey", "sis": {"kind": "interpolated-ppr", "lambda_mix": 0.9}}],
    "shifts": [{"protocol": "rw", "n": 20, "per_label_starts": 2}],
}


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(CFG))
    return p


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_quantify_pcc_hand_mean(tmp_path, capsys):
    post = tmp_path / "p.csv"
    post.write_text("0.2,0.8\n0.6,0.4\n")
    code, out, _ = run(capsys, "quantify", "--posteriors", post, "--quantifier", "pcc")
    assert code == 0
    np.testing.assert_allclose(json.loads(out)["pcc"], [0.4, 0.6])


def test_pipeline(tmp_path, cfg_path, capsys):
    split, model, samples = tmp_path / "split.json", tmp_path / "model", tmp_path / "s.json"
    assert run(capsys, "split", "--config", cfg_path, "--out", split)[0] == 0
    assert run(capsys, "train", "--config", cfg_path, "--split", split, "--out", model)[0] == 0
    assert (model / "model.json").exists()
    assert run(capsys, "sample", "--config", cfg_path, "--split", split, "--out", samples)[0] == 0
    assert len(json.loads(samples.read_text())) == 6
    code, out, _ = run(capsys, "quantify", "--config", cfg_path, "--split", split, "--samples", samples,
                       "--posteriors", model / "posteriors.csv")
    assert code == 0
    recs = json.loads(out)
    assert len(recs) == 6 and set(recs[0]["estimates"]) == {"pcc", "pacc", "kdey-sis"}
    for est in recs[0]["estimates"].values():
        assert abs(sum(est) - 1) < 1e-9


def test_bench_and_report(tmp_path, cfg_path, capsys):
    r1, r2, table = tmp_path / "r1.csv", tmp_path / "r2.csv", tmp_path / "t.csv"
    assert run(capsys, "bench", "--config", cfg_path, "--out", r1)[0] == 0
    assert run(capsys, "bench", "--config", cfg_path, "--out", r2, "--jobs", 2)[0] == 0
    assert r1.read_bytes() == r2.read_bytes()
    assert run(capsys, "report", "--results", r1, "--out", table)[0] == 0
    assert "ae_rank" in table.read_text().splitlines()[0]


def test_overrides(tmp_path, cfg_path, capsys):
    out = tmp_path / "r.csv"
    run(capsys, "bench", "--config", cfg_path, "--out", out, "--quantifier", "kdey-sis", "--lambda-mix", "0.5",
        "--sigma", "0.2", "--shift", "rw")
    rows = out.read_text().splitlines()[1:]
    assert rows and all(",kdey-sis," in r for r in rows)


def test_seed_env_fallback(tmp_path, capsys, monkeypatch):
    cfg = dict(CFG)
    del cfg["seed"]
    del cfg["split"]
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg))
    monkeypatch.setenv("GQ_SEED", "3")
    a = run(capsys, "split", "--config", p)[1]
    b = run(capsys, "split", "--config", p, "--seed", "3")[1]
    monkeypatch.setenv("GQ_SEED", "4")
    c = run(capsys, "split", "--config", p)[1]
    assert a == b
    assert json.loads(a)["classifier_train"] != json.loads(c)["classifier_train"]


def test_report_empty_results(tmp_path, capsys):
    empty = tmp_path / "e.csv"
    empty.write_text("dataset,shift,classifier,quantifier,split_seed,clf_seed,sample_id,ae,rae,flags\n")
    code, _, err = run(capsys, "report", "--results", empty)
    assert code != 0
    assert err.strip() == "error: results: no trials"


@pytest.mark.parametrize("argv,key", [
    (["report", "--results", "missing.csv"], "results"),
    (["bench", "--config", "missing.json"], "config"),
    (["quantify"], "posteriors"),
])
def test_errors_are_one_line(tmp_path, capsys, argv, key):
    code, _, err = run(capsys, *argv)
    assert code != 0
    lines = err.strip().splitlines()
    assert len(lines) == 1 and lines[0].startswith(f"error: {key}: ")


def test_invalid_config_value(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({**CFG, "shifts": [{"protocol": "rw", "n": 0}]}))
    code, _, err = run(capsys, "bench", "--config", p)
    assert code != 0 and err.startswith("error: ") and len(err.strip().splitlines()) == 1
