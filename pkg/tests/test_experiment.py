"""Stage orchestration on the small tree: artifacts, stamps, reports."""

from __future__ import annotations

import copy
import json

import pytest

from conftest import SMALL_SEED
from holocheck.config import ExperimentConfig, artifact_stamp
from holocheck.decision import POLARITY, load_scores
from holocheck.encoder import TrainConfig, load_checkpoint
from holocheck.experiment import (checkpoint_path, evaluate_run, infer_clip,
                                  load_calibration, load_clips,
                                  stage_baseline_sweep, stage_calibrate,
                                  stage_evaluate, stage_split, stage_train)
from holocheck.splits import load_split


@pytest.fixture(scope="module")
def pipe(small_root, tmp_path_factory):
    """Whole pipeline, one run, one epoch, on the small tree."""
    out = tmp_path_factory.mktemp("pipeline")
    cfg = ExperimentConfig(seed=SMALL_SEED)
    cfg.dataset.root = str(small_root)
    cfg.splits.n_runs = 2
    cfg.train = TrainConfig(max_epochs=1, batch_size=8, seed=SMALL_SEED)
    cfg.output.dir = str(out)
    stage_split(cfg)
    stage_train(cfg, 0)
    stage_calibrate(cfg, 0)
    stage_evaluate(cfg, [0], with_baseline=True)
    return cfg


def test_split_stage_writes_one_file_per_run(pipe, small_clips):
    for run_id in range(2):
        plan = load_split(f"{pipe.output.dir}/split_r{run_id}.txt")
        assert plan.run_id == run_id and plan.seed == SMALL_SEED
        assert len(plan.assignment) == 6  # 2 models x 3 identities


def test_checkpoint_carries_stamp_and_history(pipe):
    model, extra = load_checkpoint(checkpoint_path(pipe, 0))
    assert extra["run_id"] == 0
    assert extra["seed"] == SMALL_SEED
    assert extra["config_hash"] == artifact_stamp(pipe)["config_hash"]
    assert [h["epoch"] for h in extra["history"]] == [1]
    assert model.architecture == "mobilenetv3_small050"


def test_calibration_artifact(pipe):
    raw = json.loads((checkpoint_path(pipe, 0).parent
                      / "calibration_r0.json").read_text())
    assert raw["score_polarity"] == POLARITY
    assert raw["run_id"] == 0 and raw["seed"] == SMALL_SEED
    cal = load_calibration(pipe, 0)
    assert cal.threshold == raw["threshold"]
    assert 0.0 <= cal.validation_fscore <= 1.0


def test_score_dumps_cover_the_test_subset(pipe):
    for name in ("scores_r0.tsv", "baseline_scores_r0.tsv"):
        rows = load_scores(f"{pipe.output.dir}/{name}")
        # 2 models x 1 test identity x (2 originals + 4 attacks)
        assert len(rows) == 12, name
        assert all(r.verdict in ("attack", "original") for r in rows)


def test_report_layout(pipe):
    text = (checkpoint_path(pipe, 0).parent / "report.txt").read_text()
    assert "contrastive/whole" in text
    assert "baseline/whole" in text
    assert "dummy/always_attack" in text
    machine = json.loads((checkpoint_path(pipe, 0).parent
                          / "report.json").read_text())
    assert machine["runs"] == [0]
    assert machine["seed"] == SMALL_SEED
    methods = {r["method"] for r in machine["rows"]}
    assert methods == {"contrastive/whole", "baseline/whole"}
    tags = {r["dataset_tag"] for r in machine["rows"]}
    assert tags == {"holo_vanilla", "holo_photo_replacement"}
    assert all(r["std"] == 0.0 for r in machine["rows"])  # single run


def test_infer_single_clip(pipe, small_subsets):
    clip = small_subsets["test"][0]
    row = infer_clip(pipe, 0, clip.clip_id)
    assert row.clip_id == clip.clip_id
    assert row.verdict in ("attack", "original")
    with pytest.raises(ValueError, match="not found"):
        infer_clip(pipe, 0, "no/such/clip")


def test_missing_checkpoint_names_the_file(pipe):
    with pytest.raises(FileNotFoundError, match="encoder_r1.pt"):
        evaluate_run(pipe, 1)


def test_fps_resampling_happens_on_load(pipe):
    cfg = copy.deepcopy(pipe)
    cfg.dataset.target_fps = 2.5
    clips = load_clips(cfg)
    assert all(len(c) == 4 and c.fps == 2.5 for c in clips)


def test_baseline_sweep_artifact(small_root, tmp_path):
    cfg = ExperimentConfig(seed=3)
    cfg.dataset.root = str(small_root)
    cfg.output.dir = str(tmp_path)
    cfg.baseline.working_size = (160, 100)
    path = stage_baseline_sweep(cfg)
    text = path.read_text()
    assert text.startswith("# seed=3 config_hash=")
    assert "T = full clip" in text
    assert "best: S=" in text and "AUC=" in text


def test_cumulative_strategy_records_stop_indices(pipe):
    cfg = copy.deepcopy(pipe)
    cfg.decision.strategy = "cumulative"
    results = evaluate_run(cfg, 0)
    rows = load_scores(f"{cfg.output.dir}/scores_r0.tsv")
    assert {r.stop_index for r in rows} <= set(range(8))
    assert any(r.stop_index is not None for r in rows)
    tags = {res.dataset_tag for res in results}
    assert tags == {"holo_vanilla", "holo_photo_replacement"}
