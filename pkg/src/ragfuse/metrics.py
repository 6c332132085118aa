"""Ranking metrics and representation-similarity measures.

AUC uses the rank (Mann-Whitney) formulation with ties counted as half;
AP uses step-wise interpolation over the descending-score ranking. Both are
O(m log m) and are cross-checked against quadratic brute-force oracles in the
test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class MetricReport:
    auc: float
    ap: float
    f1_macro: float
    threshold: float = 0.5

    def as_dict(self) -> dict:
        return {
            "auc": self.auc,
            "ap": self.ap,
            "f1_macro": self.f1_macro,
            "threshold": self.threshold,
        }


def _rank_average_ties(values: np.ndarray) -> np.ndarray:
    """1-based ranks; tied values share the average of their rank range."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    n = len(values)
    while i < n:
        j = i + 1
        while j < n and sorted_vals[j] == sorted_vals[i]:
            j += 1
        ranks[order[i:j]] = 0.5 * (i + 1 + j)
        i = j
    return ranks


def roc_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Probability a random positive outranks a random negative (ties 0.5)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("single-class input: AUC undefined")
    ranks = _rank_average_ties(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def average_precision(scores: np.ndarray, labels: np.ndarray) -> float:
    """AP = sum_k (R_k - R_{k-1}) * P_k over the descending-score ranking.

    Ties are broken deterministically by (score desc, original index asc).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n_pos = int((labels == 1).sum())
    if n_pos == 0:
        raise ValueError("average precision needs at least one positive")
    order = np.argsort(-scores, kind="stable")
    hits = (labels[order] == 1).astype(np.float64)
    cum_tp = np.cumsum(hits)
    precision = cum_tp / np.arange(1, len(hits) + 1)
    return float((precision * hits).sum() / n_pos)


def f1_macro(scores: np.ndarray, labels: np.ndarray, threshold: float = 0.5) -> float:
    """Unweighted mean of the per-class F1 scores; 0/0 counts as 0."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    preds = (scores >= threshold).astype(np.int64)
    f1s = []
    for cls in (0, 1):
        tp = int(((preds == cls) & (labels == cls)).sum())
        fp = int(((preds == cls) & (labels != cls)).sum())
        fn = int(((preds != cls) & (labels == cls)).sum())
        denom = 2 * tp + fp + fn
        f1s.append(2 * tp / denom if denom else 0.0)
    return float(np.mean(f1s))


def compute_metrics(scores, labels, threshold: float = 0.5) -> MetricReport:
    return MetricReport(
        auc=roc_auc(scores, labels),
        ap=average_precision(scores, labels),
        f1_macro=f1_macro(scores, labels, threshold),
        threshold=threshold,
    )


def mean_cosine_similarity(x: np.ndarray, y: np.ndarray) -> float:
    """Mean over rows of <x_i, y_i>/(|x_i||y_i|); zero-norm rows contribute 0."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("shape mismatch")
    nx = np.linalg.norm(x, axis=1)
    ny = np.linalg.norm(y, axis=1)
    dots = (x * y).sum(axis=1)
    denom = nx * ny
    sims = np.divide(dots, denom, out=np.zeros_like(dots), where=denom > 0)
    return float(sims.mean())


def linear_cka(x: np.ndarray, y: np.ndarray) -> float:
    """Linear centered kernel alignment between two feature matrices.

        CKA = |Y~^T X~|_F^2 / (|X~^T X~|_F * |Y~^T Y~|_F)

    with X~, Y~ column-centered. Invariant to orthogonal transforms and
    isotropic scaling; lies in [0, 1].
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[0] != y.shape[0]:
        raise ValueError("row count mismatch")
    if x.shape[0] < 2:
        raise ValueError("need at least 2 rows")
    xc = x - x.mean(axis=0, keepdims=True)
    yc = y - y.mean(axis=0, keepdims=True)
    denom = np.linalg.norm(xc.T @ xc) * np.linalg.norm(yc.T @ yc)
    if denom == 0.0:
        raise ValueError("zero-variance input: CKA undefined")
    return float(np.linalg.norm(yc.T @ xc) ** 2 / denom)
