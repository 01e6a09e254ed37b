"""End-to-end experiment orchestration: the plumbing behind the CLI.

Stages write their artifacts under ``output.dir`` with predictable names
(split_r0.txt, encoder_r0.pt, calibration_r0.json, report.txt, ...), each
stamped with the seed and config hash. Train/calibrate/evaluate operate per
run so the 5-run protocol is just a loop, and the baseline shares the same
splits and report machinery as the encoder pipeline.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from pathlib import Path

import numpy as np

from . import catalog
from .baseline import baseline_decide, format_sweep_table, parameter_sweep
from .config import ExperimentConfig, artifact_stamp
from .decision import (CalibrationResult, ScoreRow, calibrate_classifier_threshold,
                       calibrate_threshold, classifier_decide, decide_cumulative,
                       decide_whole, save_scores, video_score)
from .encoder import (ClassifierModel, EncoderModel, classifier_frame_probs,
                      embed_clip, load_checkpoint, save_checkpoint, train,
                      train_classifier)
from .metrics import (ClipOutcome, RunResult, aggregate_runs, format_summary)
from .splits import SplitPlan, clip_subsets, generate_splits, load_split, \
    save_split

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# artifact paths


def out_dir(cfg: ExperimentConfig) -> Path:
    path = Path(cfg.output.dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def split_path(cfg: ExperimentConfig, run_id: int) -> Path:
    return out_dir(cfg) / f"split_r{run_id}.txt"


def checkpoint_path(cfg: ExperimentConfig, run_id: int) -> Path:
    tag = "classifier" if cfg.train.mode == "classifier" else "encoder"
    return out_dir(cfg) / f"{tag}_r{run_id}.pt"


def calibration_path(cfg: ExperimentConfig, run_id: int) -> Path:
    return out_dir(cfg) / f"calibration_r{run_id}.json"


# ---------------------------------------------------------------------------
# data access


def load_clips(cfg: ExperimentConfig) -> list[catalog.ClipRecord]:
    clips = catalog.scan_dataset(cfg.dataset.root, cfg.dataset.kind)
    if cfg.dataset.target_fps:
        clips = [catalog.resample_clip(c, cfg.dataset.target_fps)
                 for c in clips]
    return clips


def make_roi_loader(cfg: ExperimentConfig):
    rois = catalog.load_roi_config(cfg.dataset.roi_path())
    return catalog.make_roi_loader(rois)


def rectified_frames(clip: catalog.ClipRecord,
                     working_size: tuple[int, int]) -> list[np.ndarray]:
    """Baseline input: every frame perspective-unwarped to the working size."""
    return [catalog.rectify_frame(f, working_size) for f in clip.frames]


def load_run_subsets(cfg: ExperimentConfig, run_id: int,
                     clips: list[catalog.ClipRecord] | None = None
                     ) -> dict[str, list[catalog.ClipRecord]]:
    plan = load_split(split_path(cfg, run_id))
    return clip_subsets(plan, clips if clips is not None else load_clips(cfg))


# ---------------------------------------------------------------------------
# pipeline stages


def stage_split(cfg: ExperimentConfig) -> list[Path]:
    clips = load_clips(cfg)
    plans = generate_splits(clips, cfg.splits.n_runs, cfg.seed)
    paths = []
    for plan in plans:
        path = split_path(cfg, plan.run_id)
        save_split(plan, path)
        paths.append(path)
    log.info("wrote %d split files under %s", len(paths), out_dir(cfg))
    return paths


def stage_train(cfg: ExperimentConfig, run_id: int) -> Path:
    clips = load_clips(cfg)
    subsets = load_run_subsets(cfg, run_id, clips)
    roi_loader = make_roi_loader(cfg)
    # each run trains under its own derived seed
    tcfg = _with_seed(cfg.train, cfg.seed + run_id)
    if tcfg.mode == "classifier":
        model, history = train_classifier(subsets["train"],
                                          subsets["validation"], tcfg,
                                          roi_loader)
    else:
        model, history = train(subsets["train"], subsets["validation"], tcfg,
                               roi_loader)
    path = checkpoint_path(cfg, run_id)
    save_checkpoint(path, model,
                    extra={**artifact_stamp(cfg), "run_id": run_id,
                           "history": history})
    log.info("checkpoint written: %s", path)
    return path


def _with_seed(tcfg, seed: int):
    return dataclasses.replace(tcfg, seed=seed)


def stage_calibrate(cfg: ExperimentConfig, run_id: int) -> Path:
    clips = load_clips(cfg)
    subsets = load_run_subsets(cfg, run_id, clips)
    roi_loader = make_roi_loader(cfg)
    model, _ = load_checkpoint(checkpoint_path(cfg, run_id))
    val = subsets["validation"]
    if isinstance(model, ClassifierModel):
        scored = [(float(classifier_frame_probs(model, c, roi_loader).mean()),
                   c.label) for c in val]
        cal = calibrate_classifier_threshold(scored)
    else:
        scored = [(video_score(embed_clip(model, c, roi_loader)), c.label)
                  for c in val]
        cal = calibrate_threshold(scored, strategy=cfg.decision.strategy)
    payload = {**artifact_stamp(cfg), "run_id": run_id,
               "threshold": cal.threshold,
               "validation_fscore": cal.validation_fscore,
               "strategy": cal.strategy, "score_polarity": cal.score_polarity}
    path = calibration_path(cfg, run_id)
    path.write_text(json.dumps(payload, indent=2))
    log.info("calibration written: %s (tau=%.6g)", path, cal.threshold)
    return path


def load_calibration(cfg: ExperimentConfig, run_id: int) -> CalibrationResult:
    data = json.loads(calibration_path(cfg, run_id).read_text())
    return CalibrationResult(threshold=data["threshold"],
                             validation_fscore=data["validation_fscore"],
                             strategy=data.get("strategy", "whole"),
                             score_polarity=data["score_polarity"])


def _tag_for(clip: catalog.ClipRecord, kind: str) -> str:
    if kind == "midv_2020":
        return "midv2020_clips"
    if clip.attack_kind == "photo_replacement":
        return "holo_photo_replacement"
    return "holo_vanilla"


def _decide_clip(model, clip, cal: CalibrationResult, cfg: ExperimentConfig,
                 roi_loader) -> ScoreRow:
    if isinstance(model, ClassifierModel):
        probs = classifier_frame_probs(model, clip, roi_loader)
        score = float(probs.mean())
        verdict = classifier_decide(probs, cal.threshold)
        return ScoreRow(clip.clip_id, score, verdict, len(clip) - 1)
    seq = embed_clip(model, clip, roi_loader)
    if cfg.decision.strategy == "cumulative":
        verdict, stop = decide_cumulative(seq, cal, cfg.decision.min_buffer)
        score = video_score(seq.vectors[:stop + 1])
        return ScoreRow(clip.clip_id, score, verdict, stop)
    score = video_score(seq)
    verdict = decide_whole(seq, cal)
    return ScoreRow(clip.clip_id, score, verdict, len(clip) - 1)


def evaluate_run(cfg: ExperimentConfig, run_id: int,
                 clips: list[catalog.ClipRecord] | None = None
                 ) -> list[RunResult]:
    """Verdicts for every test clip of one run, grouped by dataset tag."""
    clips = clips if clips is not None else load_clips(cfg)
    subsets = load_run_subsets(cfg, run_id, clips)
    roi_loader = make_roi_loader(cfg)
    model, _ = load_checkpoint(checkpoint_path(cfg, run_id))
    cal = load_calibration(cfg, run_id)

    rows_by_tag: dict[str, list[ClipOutcome]] = {}
    dump: list[ScoreRow] = []
    for clip in subsets["test"]:
        row = _decide_clip(model, clip, cal, cfg, roi_loader)
        dump.append(row)
        rows_by_tag.setdefault(_tag_for(clip, cfg.dataset.kind), []).append(
            ClipOutcome(clip.clip_id, row.verdict, clip.label, row.score))
    save_scores(out_dir(cfg) / f"scores_r{run_id}.tsv", dump)
    return [RunResult(run_id=run_id, dataset_tag=tag, rows=rows)
            for tag, rows in sorted(rows_by_tag.items())]


def evaluate_baseline_run(cfg: ExperimentConfig, run_id: int,
                          clips: list[catalog.ClipRecord] | None = None
                          ) -> list[RunResult]:
    clips = clips if clips is not None else load_clips(cfg)
    subsets = load_run_subsets(cfg, run_id, clips)
    rows_by_tag: dict[str, list[ClipOutcome]] = {}
    dump: list[ScoreRow] = []
    for clip in subsets["test"]:
        frames = rectified_frames(clip, cfg.baseline.working_size)
        decision = baseline_decide(frames, cfg.baseline,
                                   strategy=cfg.decision.strategy)
        dump.append(ScoreRow(clip.clip_id, decision.ratio, decision.verdict,
                             decision.stop_index))
        rows_by_tag.setdefault(_tag_for(clip, cfg.dataset.kind), []).append(
            ClipOutcome(clip.clip_id, decision.verdict, clip.label,
                        decision.ratio))
    save_scores(out_dir(cfg) / f"baseline_scores_r{run_id}.tsv", dump)
    return [RunResult(run_id=run_id, dataset_tag=tag, rows=rows)
            for tag, rows in sorted(rows_by_tag.items())]


def stage_evaluate(cfg: ExperimentConfig, runs: list[int],
                   with_baseline: bool = False,
                   with_encoder: bool = True) -> Path:
    clips = load_clips(cfg)
    per_method: dict[str, list[RunResult]] = {}
    if with_encoder:
        method = ("classifier" if cfg.train.mode == "classifier" else
                  "contrastive") + f"/{cfg.decision.strategy}"
        per_method[method] = []
        for run_id in runs:
            per_method[method].extend(evaluate_run(cfg, run_id, clips))
    if with_baseline:
        tag = f"baseline/{cfg.decision.strategy}"
        per_method[tag] = []
        for run_id in runs:
            per_method[tag].extend(evaluate_baseline_run(cfg, run_id, clips))

    aggregates = {m: aggregate_runs(rs) if len(runs) > 1 else
                  {(r.dataset_tag, k): (v, 0.0) for r in rs
                   for k, v in r.metric_values().items()}
                  for m, rs in per_method.items()}
    report = format_summary(aggregates)
    report_path = out_dir(cfg) / "report.txt"
    report_path.write_text(report + "\n")

    machine = {**artifact_stamp(cfg), "runs": runs, "rows": []}
    for m, agg in aggregates.items():
        for (tag, metric), (mean, std) in sorted(agg.items()):
            machine["rows"].append({"method": m, "dataset_tag": tag,
                                    "metric": metric, "mean": mean,
                                    "std": std})
    (out_dir(cfg) / "report.json").write_text(json.dumps(machine, indent=2))
    log.info("report written: %s", report_path)
    return report_path


def stage_baseline_sweep(cfg: ExperimentConfig) -> Path:
    clips = load_clips(cfg)
    provider = lambda clip: rectified_frames(clip, cfg.baseline.working_size)
    t_grid = (cfg.baseline.t_window,) if cfg.baseline.t_window else (None,)
    entries, best = parameter_sweep(clips, provider, t_grid=t_grid)
    table = format_sweep_table(entries)
    path = out_dir(cfg) / "baseline_sweep.txt"
    stamp = artifact_stamp(cfg)
    body = (f"# seed={stamp['seed']} config_hash={stamp['config_hash']}\n"
            f"{table}\nbest: S={best.s_thresh:g} h={best.h_thresh:g} "
            f"T={best.t_window} AUC={best.auc:.3f}\n")
    path.write_text(body)
    log.info("sweep written: %s", path)
    return path


def infer_clip(cfg: ExperimentConfig, run_id: int,
               clip_id: str) -> ScoreRow:
    clips = load_clips(cfg)
    matches = [c for c in clips if c.clip_id == clip_id]
    if not matches:
        raise ValueError(f"clip {clip_id!r} not found under "
                         f"{cfg.dataset.root}")
    model, _ = load_checkpoint(checkpoint_path(cfg, run_id))
    cal = load_calibration(cfg, run_id)
    return _decide_clip(model, matches[0], cal, cfg, make_roi_loader(cfg))
