"""Video scoring, threshold calibration and the two decision strategies."""

from __future__ import annotations

import math

import numpy as np
import pytest

from holocheck.decision import (MIN_BUFFER, POLARITY, CalibrationResult,
                                EmbeddingSequence, ScoreRow,
                                calibrate_classifier_threshold,
                                calibrate_threshold, classifier_decide,
                                decide_cumulative, decide_whole, load_scores,
                                save_scores, threshold_candidates, video_score)


def _cal(tau, f=0.5, strategy="whole"):
    return CalibrationResult(threshold=tau, validation_fscore=f,
                             strategy=strategy)


# ---------------------------------------------------------------------------
# scoring


def test_video_score_hand_cases():
    e1, e2 = np.eye(2)
    assert video_score(np.stack([e1])) == 0.0
    assert video_score(np.stack([e1, e1])) == pytest.approx(0.0, abs=1e-12)
    assert video_score(np.stack([e1, e2])) == pytest.approx(1.0)
    assert video_score(np.stack([e1, -e1])) == pytest.approx(2.0)
    # three frames: pairs (0,1)=1, (0,2)=2, (1,2)=1 -> mean 4/3
    assert video_score(np.stack([e1, e2, -e1])) == pytest.approx(4 / 3)


def test_video_score_ignores_vector_magnitude():
    rng = np.random.default_rng(0)
    vecs = rng.normal(size=(6, 16))
    scales = rng.uniform(1e-12, 1e12, size=(6, 1))
    assert video_score(vecs * scales) == pytest.approx(video_score(vecs),
                                                       rel=1e-12)


def test_embedding_sequence_validation():
    with pytest.raises(ValueError, match="n >= 1"):
        EmbeddingSequence("c", np.zeros((0, 4)))
    with pytest.raises(ValueError, match="n >= 1"):
        EmbeddingSequence("c", np.zeros(4))
    with pytest.raises(ValueError, match="non-finite"):
        EmbeddingSequence("c", [[1.0, np.nan]])
    with pytest.raises(ValueError, match="degenerate"):
        EmbeddingSequence("c", [[1.0, 0.0], [0.0, 0.0]])
    seq = EmbeddingSequence("c", [[3, 4], [5, 12]])
    assert len(seq) == 2 and seq.vectors.dtype == np.float64


# ---------------------------------------------------------------------------
# calibration


def test_threshold_candidates_are_bracketed_midpoints():
    assert threshold_candidates([0.4]) == [-math.inf, math.inf]
    assert threshold_candidates([2.0, 1.0, 2.0]) \
        == [-math.inf, 1.5, math.inf]
    assert threshold_candidates([0.0, 1.0, 3.0]) \
        == [-math.inf, 0.5, 2.0, math.inf]


def test_calibration_breaks_ties_toward_the_smallest_threshold():
    # scores 0,1,2,3 with labels attack,original,original,attack:
    # tau=0.5 and tau=3.5 (and inf) all reach F=2/3; keep 0.5.
    val = [(0.0, "attack"), (1.0, "original"), (2.0, "original"),
           (3.0, "attack")]
    cal = calibrate_threshold(val)
    assert cal.threshold == 0.5
    assert cal.validation_fscore == pytest.approx(2 / 3)
    assert cal.score_polarity == POLARITY


def test_calibration_separable_case():
    val = [(0.1, "attack"), (0.2, "attack"), (0.8, "original"),
           (0.9, "original")]
    cal = calibrate_threshold(val)
    assert cal.threshold == pytest.approx(0.5)
    assert cal.validation_fscore == 1.0


def test_calibration_rejects_unusable_sets():
    with pytest.raises(ValueError, match="empty"):
        calibrate_threshold([])
    with pytest.raises(ValueError, match="single-class"):
        calibrate_threshold([(0.1, "attack"), (0.2, "attack")])


# ---------------------------------------------------------------------------
# decisions


def test_whole_clip_polarity_is_strict():
    seq = EmbeddingSequence("c", np.eye(2))  # score exactly 1.0
    assert decide_whole(seq, _cal(1.0)) == "original"  # score == tau
    assert decide_whole(seq, _cal(1.0 + 1e-9)) == "attack"


def test_cumulative_waits_for_the_buffer():
    e1, e2 = np.eye(2)
    # alternating orthogonal frames score 0.6 on any 5-prefix; tau below that
    vectors = [e1 if t % 2 == 0 else e2 for t in range(12)]
    verdict, index = decide_cumulative(vectors, _cal(0.5))
    assert (verdict, index) == ("original", MIN_BUFFER - 1)


def test_cumulative_constant_clip_is_an_attack():
    vectors = [np.array([1.0, 0.0])] * 9
    for tau in (1e-9, 0.1, 0.5, 1.99):
        verdict, index = decide_cumulative(vectors, _cal(tau))
        assert (verdict, index) == ("attack", 8)


def test_cumulative_short_clip_single_decision():
    e1, e2 = np.eye(2)
    verdict, index = decide_cumulative([e1, e2, e1], _cal(0.5))
    assert (verdict, index) == ("original", 2)
    verdict, index = decide_cumulative([e1, e1], _cal(0.5))
    assert (verdict, index) == ("attack", 1)
    with pytest.raises(ValueError, match="empty"):
        decide_cumulative([], _cal(0.5))


def test_cumulative_late_acceptance():
    e1, e2 = np.eye(2)
    # constant head, change arrives at frame 6
    vectors = [e1] * 6 + [e2] * 6
    verdict, index = decide_cumulative(vectors, _cal(0.3))
    assert verdict == "original"
    assert index >= MIN_BUFFER - 1
    prefix = np.stack(vectors[:index + 1])
    assert video_score(prefix) >= 0.3
    if index > MIN_BUFFER - 1:
        assert video_score(np.stack(vectors[:index])) < 0.3


def test_calibration_result_validation():
    with pytest.raises(ValueError, match="strategy"):
        CalibrationResult(threshold=0.1, validation_fscore=0.5,
                          strategy="eager")
    with pytest.raises(ValueError, match="fscore"):
        CalibrationResult(threshold=0.1, validation_fscore=1.5)


# ---------------------------------------------------------------------------
# classifier ablation


def test_classifier_decision_uses_the_mean_probability():
    assert classifier_decide([0.9, 0.8, 0.7], 0.75) == "attack"
    assert classifier_decide([0.9, 0.1], 0.51) == "original"
    assert classifier_decide([0.5], 0.5) == "attack"  # >= is inclusive
    with pytest.raises(ValueError, match="no frame"):
        classifier_decide([], 0.5)
    with pytest.raises(ValueError, match="outside"):
        classifier_decide([1.2], 0.5)


def test_classifier_calibration_flips_the_polarity():
    val = [(0.9, "attack"), (0.8, "attack"), (0.2, "original"),
           (0.1, "original")]
    cal = calibrate_classifier_threshold(val)
    assert cal.threshold == pytest.approx(0.5)
    assert cal.validation_fscore == 1.0
    assert "prob >=" in cal.score_polarity


# ---------------------------------------------------------------------------
# score dumps


def test_score_dump_roundtrip(tmp_path):
    rows = [ScoreRow("clip_a", 0.123456789012345, "original", 7),
            ScoreRow("clip_b", 1e-17, "attack", None)]
    path = tmp_path / "scores.tsv"
    save_scores(path, rows)
    loaded = load_scores(path)
    assert loaded == rows  # repr round-trips floats exactly
    bad = tmp_path / "bad.tsv"
    bad.write_text("nope\n")
    with pytest.raises(ValueError, match="not a score dump"):
        load_scores(bad)
