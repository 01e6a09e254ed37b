"""Video-level verdicts from frame embedding sequences.

A clip's score is the mean cosine distance over all unordered frame pairs:
high score means the ROI changes appearance across frames (original-like),
low score means it stays put (attack-like). A single threshold is calibrated
on validation scores by maximizing F-score with attack as the positive
class. The polarity is a fixed contract: score < threshold => attack.

Two decision strategies: ``whole`` scores the full clip once; ``cumulative``
rescores the growing prefix after every frame once a minimum buffer is
filled and accepts the clip as original the first time the prefix score
clears the threshold (early stop).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .metrics import f_score

log = logging.getLogger(__name__)

POLARITY = "score < threshold => attack"
STRATEGIES = ("whole", "cumulative")
MIN_BUFFER = 5


@dataclass
class EmbeddingSequence:
    """Ordered per-frame embeddings of one clip, shape (n_frames, dim)."""

    clip_id: str
    vectors: np.ndarray

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or len(self.vectors) < 1:
            raise ValueError(f"{self.clip_id}: need a (n, dim) array with n >= 1")
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError(f"{self.clip_id}: non-finite embedding")
        if np.any(np.linalg.norm(self.vectors, axis=1) == 0):
            raise ValueError(f"{self.clip_id}: degenerate embedding")

    def __len__(self) -> int:
        return len(self.vectors)


@dataclass
class CalibrationResult:
    threshold: float
    validation_fscore: float
    strategy: str = "whole"
    score_polarity: str = POLARITY

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if not 0.0 <= self.validation_fscore <= 1.0:
            raise ValueError("validation fscore outside [0, 1]")


def _pair_score(vectors: np.ndarray) -> float:
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("degenerate embedding")
    unit = vectors / norms
    n = len(unit)
    total = np.float64(0.0)
    for i in range(n - 1):
        for j in range(i + 1, n):
            total += 1.0 - float(unit[i] @ unit[j])
    return float(total / (n * (n - 1) // 2))


def video_score(seq: EmbeddingSequence | np.ndarray) -> float:
    """Mean pairwise cosine distance over unordered frame pairs, in [0, 2]."""
    vectors = seq.vectors if isinstance(seq, EmbeddingSequence) else \
        np.asarray(seq, dtype=np.float64)
    if len(vectors) < 2:
        return 0.0
    return _pair_score(vectors)


def threshold_candidates(scores: Sequence[float]) -> list[float]:
    """Midpoints of consecutive distinct scores, bracketed by +-inf."""
    distinct = sorted(set(float(s) for s in scores))
    mids = [(a + b) / 2.0 for a, b in zip(distinct, distinct[1:])]
    return [-math.inf] + mids + [math.inf]


def calibrate_threshold(val: Sequence[tuple[float, str]],
                        strategy: str = "whole") -> CalibrationResult:
    """Pick the threshold maximizing validation F-score (attack positive).

    Ties go to the smallest threshold. ``val`` holds (video_score, label)
    pairs and must contain both labels.
    """
    if not val:
        raise ValueError("empty validation set")
    scores = [s for s, _ in val]
    labels = [l for _, l in val]
    if len(set(labels)) < 2:
        raise ValueError("single-class validation set; cannot calibrate")
    best_tau, best_f = None, -1.0
    for tau in threshold_candidates(scores):
        verdicts = ["attack" if s < tau else "original" for s in scores]
        f = f_score(verdicts, labels).fscore
        if f > best_f:
            best_tau, best_f = tau, f
    log.info("calibrated threshold %.6g (validation F %.4f, %s)",
             best_tau, best_f, strategy)
    return CalibrationResult(threshold=float(best_tau),
                             validation_fscore=float(best_f),
                             strategy=strategy)


def decide_whole(seq: EmbeddingSequence,
                 cal: CalibrationResult) -> str:
    return "attack" if video_score(seq) < cal.threshold else "original"


def decide_cumulative(vectors: Iterable[np.ndarray] | EmbeddingSequence,
                      cal: CalibrationResult,
                      min_buffer: int = MIN_BUFFER) -> tuple[str, int]:
    """Stream frames; accept as original the first time a prefix clears tau.

    The prefix score is evaluated after every frame with index
    >= min_buffer - 1. Clips shorter than the buffer get a single decision
    at the end. Returns (verdict, index of the frame the decision fell on).
    """
    if isinstance(vectors, EmbeddingSequence):
        vectors = list(vectors.vectors)
    seen: list[np.ndarray] = []
    index = -1
    for vec in vectors:
        seen.append(np.asarray(vec, dtype=np.float64))
        index += 1
        if index >= min_buffer - 1:
            if video_score(np.stack(seen)) >= cal.threshold:
                return "original", index
    if index < 0:
        raise ValueError("empty embedding stream")
    if index < min_buffer - 1:  # short clip: single decision at the end
        verdict = "original" if video_score(np.stack(seen)) >= cal.threshold \
            else "attack"
        return verdict, index
    return "attack", index


def classifier_decide(frame_probs: Sequence[float], tau_c: float) -> str:
    """Video verdict from per-frame attack probabilities (ablation path)."""
    if len(frame_probs) == 0:
        raise ValueError("no frame probabilities")
    probs = np.asarray(frame_probs, dtype=np.float64)
    if np.any(probs < 0) or np.any(probs > 1):
        raise ValueError("probabilities outside [0, 1]")
    return "attack" if float(probs.mean()) >= tau_c else "original"


def calibrate_classifier_threshold(
        val: Sequence[tuple[float, str]]) -> CalibrationResult:
    """Same sweep as calibrate_threshold but attack iff mean prob >= tau."""
    if not val:
        raise ValueError("empty validation set")
    scores = [s for s, _ in val]
    labels = [l for _, l in val]
    if len(set(labels)) < 2:
        raise ValueError("single-class validation set; cannot calibrate")
    best_tau, best_f = None, -1.0
    for tau in threshold_candidates(scores):
        verdicts = ["attack" if s >= tau else "original" for s in scores]
        f = f_score(verdicts, labels).fscore
        if f > best_f:
            best_tau, best_f = tau, f
    return CalibrationResult(threshold=float(best_tau),
                             validation_fscore=float(best_f),
                             score_polarity="mean prob >= threshold => attack")


# ---------------------------------------------------------------------------
# score dumps


@dataclass
class ScoreRow:
    clip_id: str
    score: float
    verdict: str
    stop_index: int | None = None


def save_scores(path: Path | str, rows: Sequence[ScoreRow]) -> None:
    lines = ["clip_id\tscore\tverdict\tstop_index"]
    for r in rows:
        stop = "" if r.stop_index is None else str(r.stop_index)
        lines.append(f"{r.clip_id}\t{r.score!r}\t{r.verdict}\t{stop}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_scores(path: Path | str) -> list[ScoreRow]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != "clip_id\tscore\tverdict\tstop_index":
        raise ValueError(f"not a score dump: {path}")
    rows = []
    for line in lines[1:]:
        if not line.strip():
            continue
        clip_id, score, verdict, stop = line.split("\t")
        rows.append(ScoreRow(clip_id=clip_id, score=float(score),
                             verdict=verdict,
                             stop_index=int(stop) if stop else None))
    return rows
