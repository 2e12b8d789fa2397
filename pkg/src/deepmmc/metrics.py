"""Clustering evaluation: matched accuracy, adjusted Rand index, pair ROC."""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.stats import rankdata

from .clustering import ClusterWeights, best_diff_assignment, best_same_assignment
from .encoder import DeepNet, encode
from .numeric import DataMatrix


@dataclass(frozen=True)
class ContingencyTable:
    """Cross-tabulation of two labelings over the same items."""

    counts: np.ndarray  # K_pred x K_true
    pred_values: np.ndarray
    true_values: np.ndarray

    @classmethod
    def from_labels(cls, pred, truth) -> "ContingencyTable":
        pred = np.asarray(pred).ravel()
        truth = np.asarray(truth).ravel()
        if pred.size != truth.size or pred.size == 0:
            raise ValueError("labelings must be non-empty and equal length")
        pred_values, pi = np.unique(pred, return_inverse=True)
        true_values, ti = np.unique(truth, return_inverse=True)
        counts = np.zeros((pred_values.size, true_values.size), dtype=np.int64)
        np.add.at(counts, (pi, ti), 1)
        return cls(counts, pred_values, true_values)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def row_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)


def clustering_accuracy(pred, truth) -> float:
    """Accuracy under the best one-to-one matching of cluster ids.

    The contingency table is zero-padded square and matched with the
    Hungarian algorithm on negated counts; unmatched clusters contribute
    nothing.
    """
    ct = ContingencyTable.from_labels(pred, truth)
    size = max(ct.counts.shape)
    padded = np.zeros((size, size), dtype=np.int64)
    padded[: ct.counts.shape[0], : ct.counts.shape[1]] = ct.counts
    rows, cols = linear_sum_assignment(-padded)
    return float(padded[rows, cols].sum()) / ct.n


def adjusted_rand_index(pred, truth) -> float:
    """Pair-counting partition agreement corrected for chance.

    All pair counts use exact integer arithmetic; only the final ratio is
    floating point.  A zero denominator (e.g. both partitions a single
    cluster) is defined as 1.0.
    """
    ct = ContingencyTable.from_labels(pred, truth)
    if ct.n < 2:
        raise ValueError("ARI needs at least 2 items")
    sum_cells = sum(comb(int(v), 2) for v in ct.counts.ravel())
    sum_rows = sum(comb(int(v), 2) for v in ct.row_totals)
    sum_cols = sum(comb(int(v), 2) for v in ct.col_totals)
    pairs = comb(ct.n, 2)
    # ARI = (index - expected) / (max - expected), scaled by 2*pairs to
    # stay in integers
    numerator = 2 * sum_cells * pairs - 2 * sum_rows * sum_cols
    denominator = (sum_rows + sum_cols) * pairs - 2 * sum_rows * sum_cols
    if denominator == 0:
        return 1.0
    return numerator / denominator


def pairwise_scores(
    w: ClusterWeights, net: DeepNet, pairs, x: DataMatrix
) -> np.ndarray:
    """Signed same-cluster margin per pair: best joint same-cluster score
    minus best different-cluster score.  Larger means more must-link-like."""
    h = encode(net, x.values).h
    scores = np.empty(len(pairs))
    for idx, c in enumerate(pairs):
        if not 0 <= c.i < x.n or not 0 <= c.j < x.n:
            raise ValueError(f"pair ({c.i}, {c.j}) outside [0, {x.n})")
        _, s_same = best_same_assignment(w, h[c.i], h[c.j])
        _, _, s_diff = best_diff_assignment(w, h[c.i], h[c.j])
        scores[idx] = s_same - s_diff
    return scores


def roc_auc(scores, labels) -> tuple[float, np.ndarray]:
    """AUC via the rank statistic (ties count half) plus the ROC curve.

    The curve holds one (FPR, TPR) row per distinct threshold, descending,
    preceded by the (0, 0) origin.
    """
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels, dtype=bool).ravel()
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have equal length")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs both classes present")
    ranks = rankdata(scores)
    auc = (ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)

    order = np.argsort(-scores, kind="stable")
    sorted_labels = labels[order]
    sorted_scores = scores[order]
    tp = np.cumsum(sorted_labels)
    fp = np.cumsum(~sorted_labels)
    distinct = np.nonzero(np.diff(sorted_scores, append=-np.inf))[0]
    curve = np.column_stack([fp[distinct] / n_neg, tp[distinct] / n_pos])
    curve = np.vstack([[0.0, 0.0], curve])
    return float(auc), curve
