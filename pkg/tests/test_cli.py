"""Command-line round trip: synth -> split -> train -> calibrate ->
evaluate -> infer -> attribute, plus error exits."""

from __future__ import annotations

import json

import cv2
import pytest

from holocheck.cli import run_command
from holocheck.decision import load_scores

CLIP = "origins/model_00/person_00/clip_00"


@pytest.fixture(scope="module")
def cli_env(tmp_path_factory):
    """Full chain on a freshly synthesized tiny tree, one run, one epoch."""
    base = tmp_path_factory.mktemp("cli")
    root, out = str(base / "data"), str(base / "runs")
    steps = [
        ["synth", "--root", root, "--models", "2", "--identities", "3",
         "--frames", "8", "--originals", "2", "--seed", "7"],
        ["split", "--root", root, "--out", out, "--runs", "2", "--seed", "7"],
        ["train", "--root", root, "--out", out, "--seed", "7", "--epochs",
         "1", "--batch-size", "8", "--run", "0"],
        ["calibrate", "--root", root, "--out", out, "--seed", "7", "--run",
         "0"],
        ["evaluate", "--root", root, "--out", out, "--seed", "7", "--runs",
         "0", "--with-baseline"],
    ]
    for argv in steps:
        assert run_command(argv) == 0, argv[0]
    return base


def test_chain_writes_every_artifact(cli_env):
    out = cli_env / "runs"
    for name in ("split_r0.txt", "split_r1.txt", "encoder_r0.pt",
                 "calibration_r0.json", "scores_r0.tsv",
                 "baseline_scores_r0.tsv", "report.txt", "report.json"):
        assert (out / name).is_file(), name
    report = (out / "report.txt").read_text()
    assert "contrastive/whole" in report and "dummy/random" in report
    rows = load_scores(out / "scores_r0.tsv")
    assert len(rows) == 12


def test_infer_prints_the_verdict(cli_env, capsys):
    code = run_command(["infer", "--root", str(cli_env / "data"), "--out",
                        str(cli_env / "runs"), "--run", "0", "--clip-id",
                        CLIP])
    assert code == 0
    text = capsys.readouterr().out
    assert CLIP in text
    assert "attack" in text or "original" in text


def test_attribute_writes_an_overlay(cli_env):
    img_path = cli_env / "attr.png"
    code = run_command(["attribute", "--root", str(cli_env / "data"), "--out",
                        str(cli_env / "runs"), "--run", "0", "--clip-id",
                        CLIP, "--frame", "0", "--baseline-frame", "1",
                        "--steps", "4", "--out-image", str(img_path)])
    assert code == 0
    overlay = cv2.imread(str(img_path))
    assert overlay is not None and overlay.ndim == 3


def test_attribute_rejects_out_of_range_frames(cli_env, capsys):
    code = run_command(["attribute", "--root", str(cli_env / "data"), "--out",
                        str(cli_env / "runs"), "--run", "0", "--clip-id",
                        CLIP, "--frame", "99", "--out-image",
                        str(cli_env / "nope.png")])
    assert code == 1
    assert "frame" in capsys.readouterr().err


def test_split_output_is_reproducible(cli_env, tmp_path):
    out2 = tmp_path / "runs2"
    code = run_command(["split", "--root", str(cli_env / "data"), "--out",
                        str(out2), "--runs", "2", "--seed", "7"])
    assert code == 0
    for name in ("split_r0.txt", "split_r1.txt"):
        assert (out2 / name).read_bytes() \
            == (cli_env / "runs" / name).read_bytes()


def test_baseline_sweep_via_config_file(cli_env, tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("baseline:\n  working_size: [160, 100]\n")
    out = tmp_path / "sweep"
    code = run_command(["baseline", "--sweep", "--config", str(cfg), "--root",
                        str(cli_env / "data"), "--out", str(out)])
    assert code == 0
    text = (out / "baseline_sweep.txt").read_text()
    assert "h\\S" in text and "best: S=" in text


def test_missing_checkpoint_fails_cleanly(cli_env, tmp_path, capsys):
    out = tmp_path / "bare"
    assert run_command(["split", "--root", str(cli_env / "data"), "--out",
                        str(out), "--runs", "1", "--seed", "7"]) == 0
    code = run_command(["evaluate", "--root", str(cli_env / "data"), "--out",
                        str(out), "--runs", "0"])
    assert code == 1
    assert "encoder_r0.pt" in capsys.readouterr().err


def test_usage_errors_exit_with_two(capsys):
    assert run_command(["defraud"]) == 2
    capsys.readouterr()
    assert run_command(["infer"]) == 2  # --clip-id is required
    capsys.readouterr()


def test_help_exits_zero(capsys):
    assert run_command(["--help"]) == 0
    assert "synth" in capsys.readouterr().out


def test_report_json_stamp_matches_cli_seed(cli_env):
    machine = json.loads((cli_env / "runs" / "report.json").read_text())
    assert machine["seed"] == 7
