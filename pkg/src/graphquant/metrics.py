"""Quantification error metrics, rankings and significance marking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import stats


def _pair(q, q_hat):
    q = np.asarray(q, dtype=np.float64)
    q_hat = np.asarray(q_hat, dtype=np.float64)
    if q.shape != q_hat.shape:
        raise ValueError(f"prevalence length mismatch: {q.shape} vs {q_hat.shape}")
    return q, q_hat


def ae(q, q_hat) -> float:
    """Mean absolute error across classes."""
    q, q_hat = _pair(q, q_hat)
    return float(np.mean(np.abs(q - q_hat)))


def smooth(q, eps: float) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    return (q + eps) / (1.0 + eps * q.size)


def rae(q, q_hat, n_sample: int) -> float:
    """Mean relative absolute error; both vectors are additively smoothed with
    ``eps = 1 / (2 n_sample)`` so that zero prevalences stay finite."""
    q, q_hat = _pair(q, q_hat)
    if n_sample < 1:
        raise ValueError("n_sample must be >= 1")
    eps = 1.0 / (2.0 * n_sample)
    qs, hs = smooth(q, eps), smooth(q_hat, eps)
    return float(np.mean(np.abs(qs - hs) / qs))


@dataclass
class RankTable:
    """Per-dataset means with best-equivalence markers plus average ranks.

    ``cells`` has one row per (shift, classifier, dataset, quantifier);
    ``ranks`` one row per (shift, classifier, quantifier).
    """

    cells: pd.DataFrame
    ranks: pd.DataFrame

    def wide(self) -> pd.DataFrame:
        """One row per (shift, classifier, quantifier), dataset metrics as columns."""
        keys = ["shift", "classifier", "quantifier"]
        parts = []
        for ds, sub in self.cells.groupby("dataset", sort=True):
            cols = sub.set_index(keys)[["ae", "ae_se", "ae_best", "rae", "rae_se", "rae_best"]]
            parts.append(cols.add_prefix(f"{ds}:"))
        wide = pd.concat(parts, axis=1)
        wide = wide.join(self.ranks.set_index(keys)[["ae_rank", "rae_rank", "ae_rank_best",
                                                    "rae_rank_best"]])
        return wide.reset_index()

    def to_csv(self, path) -> None:
        self.wide().to_csv(path, index=False, float_format="%.6g")


def _best_markers(block: pd.DataFrame, metric: str, alpha: float) -> pd.Series:
    """True where a one-sided Welch test does not find the quantifier worse than the best."""
    means = block.groupby("quantifier")[metric].mean()
    best = means.idxmin()
    best_vals = block.loc[block["quantifier"] == best, metric].to_numpy()
    marks = {}
    for name, vals in block.groupby("quantifier")[metric]:
        v = vals.to_numpy()
        if name == best:
            marks[name] = True
            continue
        if v.size < 2 or best_vals.size < 2:
            marks[name] = False
            continue
        if np.allclose(v, best_vals) and v.size == best_vals.size:
            marks[name] = True
            continue
        with np.errstate(all="ignore"):
            res = stats.ttest_ind(v, best_vals, equal_var=False, alternative="greater")
        p = res.pvalue
        marks[name] = bool(np.isnan(p) or p >= alpha)
    return pd.Series(marks)


def rank_and_test(results, alpha: float = 0.05) -> RankTable:
    """Aggregate trial results into a :class:`RankTable`.

    Ranks are computed per (shift, classifier, dataset) block on mean error
    (ties averaged) and then averaged across datasets. Cells with fewer than
    two trials get ``insufficient`` set and are never marked best.
    """
    df = pd.DataFrame(results if isinstance(results, pd.DataFrame) else [
        r if isinstance(r, dict) else r.to_row() for r in results])
    if df.empty:
        raise ValueError("no trials")
    if df["quantifier"].nunique() < 2:
        raise ValueError("need at least two quantifiers to rank")

    block_keys = ["shift", "classifier", "dataset"]
    rows = []
    for key, block in df.groupby(block_keys, sort=True):
        g = block.groupby("quantifier")
        n = g.size()
        cell = pd.DataFrame({
            "ae": g["ae"].mean(),
            "ae_se": g["ae"].std(ddof=1) / np.sqrt(n),
            "rae": g["rae"].mean(),
            "rae_se": g["rae"].std(ddof=1) / np.sqrt(n),
            "n": n,
        })
        cell["insufficient"] = cell["n"] < 2
        for metric in ("ae", "rae"):
            cell[f"{metric}_rank"] = stats.rankdata(cell[metric].to_numpy(), method="average")
            ok = block[block["quantifier"].isin(cell.index[~cell["insufficient"]])]
            marks = _best_markers(ok, metric, alpha) if not ok.empty else pd.Series(dtype=bool)
            cell[f"{metric}_best"] = marks.reindex(cell.index, fill_value=False).astype(bool)
        cell = cell.reset_index().rename(columns={"index": "quantifier"})
        for k, v in zip(block_keys, key):
            cell[k] = v
        rows.append(cell)
    cells = pd.concat(rows, ignore_index=True)

    keys = ["shift", "classifier", "quantifier"]
    ranks = cells.groupby(keys, sort=True).agg(ae_rank=("ae_rank", "mean"), rae_rank=("rae_rank", "mean"),
                                              datasets=("dataset", "nunique")).reset_index()
    for metric in ("ae_rank", "rae_rank"):
        best = ranks.groupby(["shift", "classifier"])[metric].transform("min")
        ranks[f"{metric}_best"] = np.isclose(ranks[metric], best)
    order = ["shift", "classifier", "dataset", "quantifier", "n", "ae", "ae_se", "ae_best", "ae_rank",
             "rae", "rae_se", "rae_best", "rae_rank", "insufficient"]
    return RankTable(cells[order], ranks)
