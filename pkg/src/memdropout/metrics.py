"""Key redundancy and retrieval quality measures."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CorrelationSummary:
    step: int
    aggregated: float
    full_matrix: Optional[np.ndarray] = None


@dataclass(frozen=True)
class F1Report:
    precision: float
    recall: float
    f1: float
    true_positive: int
    false_positive: int
    false_negative: int

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "F1Report":
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * p * r / (p + r) if p + r else 0.0
        return cls(p, r, f1, tp, fp, fn)


def pearson_matrix(keys) -> np.ndarray:
    """Pearson correlation between every pair of key rows.

    Each row's d entries are treated as paired samples.  Rows with zero
    variance correlate 0 with everything else (a warning is logged); the
    diagonal is always 1.
    """
    keys = np.asarray(keys, dtype=np.float64)
    if keys.ndim != 2:
        raise ValueError("keys must be a 2-D array")
    n, d = keys.shape
    if d < 2:
        raise ValueError("Pearson correlation needs at least 2 entries per key")
    if n < 2:
        raise ValueError("need at least two keys")
    centered = keys - keys.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1)
    constant = norms <= 1e-12 * np.maximum(1.0, np.abs(keys).max(axis=1))
    if constant.any():
        logger.warning("%d constant key row(s); their correlations are set to 0", int(constant.sum()))
    z = np.zeros_like(centered)
    z[~constant] = centered[~constant] / norms[~constant, None]
    corr = np.clip(z @ z.T, -1.0, 1.0)
    corr = (corr + corr.T) / 2
    np.fill_diagonal(corr, 1.0)
    return corr


def aggregated_correlation(keys) -> float:
    """Mean absolute off-diagonal Pearson correlation, in [0, 1]."""
    corr = pearson_matrix(keys)
    n = corr.shape[0]
    off = np.abs(corr)[~np.eye(n, dtype=bool)]
    return float(off.mean())


def correlation_summary(keys, step: int, full: bool = False) -> CorrelationSummary:
    corr = pearson_matrix(keys)
    n = corr.shape[0]
    agg = float(np.abs(corr)[~np.eye(n, dtype=bool)].mean())
    return CorrelationSummary(step, agg, corr if full else None)


def entity_f1(predicted: Iterable, gold: Iterable) -> F1Report:
    predicted, gold = set(predicted), set(gold)
    tp = len(predicted & gold)
    return F1Report.from_counts(tp, len(predicted - gold), len(gold - predicted))


def corpus_entity_f1(cases: Iterable[tuple[Iterable, Iterable]]) -> F1Report:
    """Micro-averaged entity F1: confusion counts are summed before dividing."""
    tp = fp = fn = 0
    for predicted, gold in cases:
        r = entity_f1(predicted, gold)
        tp += r.true_positive
        fp += r.false_positive
        fn += r.false_negative
    return F1Report.from_counts(tp, fp, fn)
