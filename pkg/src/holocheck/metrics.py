"""Evaluation metrics with attack as the positive class.

Raising an alert on a fraudulent document is the event we precision/recall
against, so TP = attack predicted attack. Zero denominators yield 0 with a
``degenerate`` flag instead of raising; constant predictors are legitimate
reference points, not errors. Multi-run results aggregate to mean +- sample
standard deviation (n-1), and reports carry the three dummy-predictor
reference rows.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)

POSITIVE = "attack"
DATASET_TAGS = ("holo_vanilla", "holo_photo_replacement", "midv2020_clips")

# reference predictors, percent per (vanilla F, photo-replacement recall,
# copy-attack recall)
DUMMY_REFERENCE = {
    "random": (50, 50, 50),
    "always_attack": (67, 100, 100),
    "always_original": (0, 0, 0),
}


@dataclass
class PRF:
    precision: float
    recall: float
    fscore: float
    degenerate: bool = False


def f_score(verdicts: Sequence[str], labels: Sequence[str]) -> PRF:
    """Precision/recall/F with attack positive; 0 + flag on empty denominators."""
    if len(verdicts) != len(labels):
        raise ValueError("verdicts and labels differ in length")
    tp = sum(1 for v, l in zip(verdicts, labels)
             if v == POSITIVE and l == POSITIVE)
    fp = sum(1 for v, l in zip(verdicts, labels)
             if v == POSITIVE and l != POSITIVE)
    fn = sum(1 for v, l in zip(verdicts, labels)
             if v != POSITIVE and l == POSITIVE)
    degenerate = False
    if tp + fp == 0:
        precision, degenerate = 0.0, True
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall, degenerate = 0.0, True
    else:
        recall = tp / (tp + fn)
    if precision + recall == 0:
        fscore, degenerate = 0.0, True
    else:
        fscore = 2 * precision * recall / (precision + recall)
    return PRF(precision=precision, recall=recall, fscore=fscore,
               degenerate=degenerate)


def attack_recall(verdicts: Sequence[str]) -> float:
    """Fraction flagged, on a test set known to be all attacks."""
    if len(verdicts) == 0:
        raise ValueError("empty verdict list")
    return sum(1 for v in verdicts if v == POSITIVE) / len(verdicts)


def roc_auc(scores: Sequence[float], labels: Sequence[str]) -> float:
    """P(random attack outranks random original); ties count one half.

    Caller orients scores so that higher means more attack-like.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if len(scores) != len(labels):
        raise ValueError("scores and labels differ in length")
    pos = labels == POSITIVE
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc needs both classes")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0  # average rank, 1-based
        i = j + 1
    pos_rank_sum = float(ranks[pos].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


# ---------------------------------------------------------------------------
# multi-run aggregation


@dataclass
class ClipOutcome:
    clip_id: str
    verdict: str
    label: str
    score: float


@dataclass
class RunResult:
    run_id: int
    dataset_tag: str
    rows: list[ClipOutcome] = field(default_factory=list)

    def __post_init__(self):
        if self.dataset_tag not in DATASET_TAGS:
            raise ValueError(f"unknown dataset tag {self.dataset_tag!r}")
        ids = [r.clip_id for r in self.rows]
        if len(ids) != len(set(ids)):
            raise ValueError(
                f"run {self.run_id}/{self.dataset_tag}: duplicate clip ids")

    def metric_values(self) -> dict[str, float]:
        verdicts = [r.verdict for r in self.rows]
        labels = [r.label for r in self.rows]
        if len(set(labels)) > 1:
            prf = f_score(verdicts, labels)
            return {"precision": prf.precision, "recall": prf.recall,
                    "fscore": prf.fscore}
        return {"recall": attack_recall(verdicts)}


def aggregate_runs(results: Sequence[RunResult]
                   ) -> dict[tuple[str, str], tuple[float, float]]:
    """Mean +- sample std per (dataset_tag, metric) across runs."""
    if len(results) < 2:
        raise ValueError("aggregation needs at least two runs")
    per_key: dict[tuple[str, str], list[float]] = {}
    for res in results:
        for metric, value in res.metric_values().items():
            per_key.setdefault((res.dataset_tag, metric), []).append(value)
    out = {}
    for key, values in per_key.items():
        arr = np.asarray(values, dtype=np.float64)
        std = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
        out[key] = (float(arr.mean()), std)
    return out


def format_summary(per_method: dict[str, dict[tuple[str, str],
                                              tuple[float, float]]],
                   include_dummy: bool = True) -> str:
    """Text table with one row per method/dataset/metric, percent scale."""
    lines = [f"{'method':24s} {'dataset':22s} {'metric':9s} {'value':>10s}"]
    lines.append("-" * 68)
    for method, aggregates in per_method.items():
        for (tag, metric) in sorted(aggregates):
            mean, std = aggregates[(tag, metric)]
            lines.append(f"{method:24s} {tag:22s} {metric:9s} "
                         f"{100 * mean:5.0f} +- {100 * std:2.0f}")
    if include_dummy:
        for name, (vanilla_f, pr_recall, copy_recall) in \
                DUMMY_REFERENCE.items():
            method = f"dummy/{name}"
            lines.append(f"{method:24s} {'holo_vanilla':22s} {'fscore':9s} "
                         f"{vanilla_f:5.0f} +-  0")
            lines.append(f"{method:24s} {'holo_photo_replacement':22s} "
                         f"{'recall':9s} {pr_recall:5.0f} +-  0")
            lines.append(f"{method:24s} {'midv2020_clips':22s} {'recall':9s} "
                         f"{copy_recall:5.0f} +-  0")
    return "\n".join(lines)
