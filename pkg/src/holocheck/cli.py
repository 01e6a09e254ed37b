"""Command-line entry point.

Subcommands cover the whole pipeline::

    synth      generate a synthetic dataset tree
    split      write the per-run identity-disjoint split files
    train      train the encoder (or classifier ablation) for one/all runs
    calibrate  pick the decision threshold on the validation subset
    evaluate   verdicts on the test subsets -> metrics report
    infer      score a single clip with a trained run
    baseline   pixel-statistic method: parameter sweep or per-run report
    attribute  integrated-gradients overlay for one frame

Every subcommand accepts --config (YAML, see configs/default.yaml); common
flags override config keys. Exit codes: 0 success, 1 pipeline error, 2
usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

log = logging.getLogger(__name__)


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", type=Path, default=None,
                     help="experiment config YAML")
    sub.add_argument("--root", default=None, help="dataset root directory")
    sub.add_argument("--kind", default=None,
                     choices=("synthetic", "midv_holo", "midv_2020"))
    sub.add_argument("--out", default=None, help="artifact output directory")
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="holocheck",
        description="Hologram verification for identity-document videos.")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("synth", help="generate a synthetic dataset")
    _add_common(p)
    p.add_argument("--models", type=int, default=2)
    p.add_argument("--identities", type=int, default=5)
    p.add_argument("--frames", type=int, default=12)
    p.add_argument("--originals", type=int, default=3)
    p.add_argument("--fps", type=float, default=5.0)
    p.add_argument("--illumination", type=float, default=0.0,
                   help="shared luminance wobble amplitude")
    p.add_argument("--chroma", type=float, default=0.0,
                   help="per-channel color-balance wobble amplitude")
    p.add_argument("--noise", type=float, default=0.0,
                   help="additive sensor noise sigma")
    p.add_argument("--focus", type=float, default=0.0,
                   help="focus-breathing peak blur sigma")
    p.set_defaults(func=_cmd_synth)

    p = subs.add_parser("split", help="write per-run split files")
    _add_common(p)
    p.add_argument("--runs", type=int, default=None)
    p.set_defaults(func=_cmd_split)

    p = subs.add_parser("train", help="train encoder or classifier")
    _add_common(p)
    _add_train_flags(p)
    p.add_argument("--run", type=int, default=0)
    p.add_argument("--all-runs", action="store_true")
    p.set_defaults(func=_cmd_train)

    p = subs.add_parser("calibrate", help="calibrate the decision threshold")
    _add_common(p)
    _add_train_flags(p)
    p.add_argument("--run", type=int, default=0)
    p.add_argument("--all-runs", action="store_true")
    p.set_defaults(func=_cmd_calibrate)

    p = subs.add_parser("evaluate", help="test-set verdicts and report")
    _add_common(p)
    _add_train_flags(p)
    p.add_argument("--runs", default=None,
                   help="comma-separated run ids (default: all)")
    p.add_argument("--with-baseline", action="store_true")
    p.set_defaults(func=_cmd_evaluate)

    p = subs.add_parser("infer", help="score one clip")
    _add_common(p)
    _add_train_flags(p)
    p.add_argument("--run", type=int, default=0)
    p.add_argument("--clip-id", required=True)
    p.set_defaults(func=_cmd_infer)

    p = subs.add_parser("baseline", help="pixel-statistic method")
    _add_common(p)
    p.add_argument("--sweep", action="store_true",
                   help="ROC-AUC grid over (S, h) on the whole dataset")
    p.add_argument("--runs", default=None)
    p.add_argument("--strategy", choices=("whole", "cumulative"),
                   default=None)
    p.set_defaults(func=_cmd_baseline)

    p = subs.add_parser("attribute", help="integrated-gradients overlay")
    _add_common(p)
    p.add_argument("--run", type=int, default=0)
    p.add_argument("--checkpoint", type=Path, default=None,
                   help="explicit checkpoint path (default: the run's)")
    p.add_argument("--clip-id", required=True)
    p.add_argument("--frame", type=int, default=0)
    p.add_argument("--baseline-frame", type=int, default=None,
                   help="attribute the pair distance to this frame instead "
                        "of the embedding norm from a black image")
    p.add_argument("--steps", type=int, default=64)
    p.add_argument("--out-image", type=Path, required=True)
    p.set_defaults(func=_cmd_attribute)
    return parser


def _add_train_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--arch", default=None,
                     choices=("resnet18", "mobilevit_xxs",
                              "mobilenetv3_small050"))
    sub.add_argument("--epochs", type=int, default=None)
    sub.add_argument("--batch-size", type=int, default=None)
    sub.add_argument("--mode", default=None,
                     choices=("contrastive", "classifier"))
    sub.add_argument("--train-data", default=None,
                     choices=("full", "originals_only"))
    sub.add_argument("--strategy", default=None,
                     choices=("whole", "cumulative"))
    sub.add_argument("--no-aug", action="store_true")


def _load_cfg(args: argparse.Namespace):
    from .config import ExperimentConfig, load_config
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if getattr(args, "root", None):
        cfg.dataset.root = args.root
    if getattr(args, "kind", None):
        cfg.dataset.kind = args.kind
    if getattr(args, "out", None):
        cfg.output.dir = args.out
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "runs", None) is not None and \
            isinstance(args.runs, int):
        cfg.splits.n_runs = args.runs
    if getattr(args, "arch", None):
        cfg.train.architecture = args.arch
    if getattr(args, "epochs", None):
        cfg.train.max_epochs = args.epochs
    if getattr(args, "batch_size", None):
        cfg.train.batch_size = args.batch_size
    if getattr(args, "mode", None):
        cfg.train.mode = args.mode
    if getattr(args, "train_data", None):
        cfg.train.train_data = args.train_data
    if getattr(args, "strategy", None):
        cfg.decision.strategy = args.strategy
    if getattr(args, "no_aug", False):
        cfg.train.aug.enabled = False
    return cfg


def _run_ids(args: argparse.Namespace, cfg) -> list[int]:
    runs = getattr(args, "runs", None)
    if isinstance(runs, str) and runs:
        return [int(r) for r in runs.split(",")]
    return list(range(cfg.splits.n_runs))


# ---------------------------------------------------------------------------
# subcommand bodies


def _cmd_synth(args: argparse.Namespace) -> int:
    from .synthcam import SynthSpec, generate_dataset
    out = args.out or (args.root or "data/synthetic")
    spec = SynthSpec(n_models=args.models, n_identities=args.identities,
                     frames_per_clip=args.frames,
                     originals_per_identity=args.originals, fps=args.fps,
                     illumination_amplitude=args.illumination,
                     chroma_amplitude=args.chroma,
                     noise_sigma=args.noise,
                     focus_amplitude=args.focus)
    root = generate_dataset(spec, out, seed=args.seed or 0)
    print(f"synthetic dataset written to {root}")
    return 0


def _cmd_split(args: argparse.Namespace) -> int:
    from .experiment import stage_split
    cfg = _load_cfg(args)
    paths = stage_split(cfg)
    for p in paths:
        print(p)
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    from .experiment import stage_train
    cfg = _load_cfg(args)
    runs = list(range(cfg.splits.n_runs)) if args.all_runs else [args.run]
    for run_id in runs:
        print(stage_train(cfg, run_id))
    return 0


def _cmd_calibrate(args: argparse.Namespace) -> int:
    from .experiment import stage_calibrate
    cfg = _load_cfg(args)
    runs = list(range(cfg.splits.n_runs)) if args.all_runs else [args.run]
    for run_id in runs:
        print(stage_calibrate(cfg, run_id))
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    from .experiment import stage_evaluate
    cfg = _load_cfg(args)
    report = stage_evaluate(cfg, _run_ids(args, cfg),
                            with_baseline=args.with_baseline)
    print(report.read_text())
    print(f"report: {report}")
    return 0


def _cmd_infer(args: argparse.Namespace) -> int:
    from .experiment import infer_clip
    cfg = _load_cfg(args)
    row = infer_clip(cfg, args.run, args.clip_id)
    print(f"{row.clip_id}\tscore={row.score:.6f}\tverdict={row.verdict}"
          f"\tstop_index={row.stop_index}")
    return 0


def _cmd_baseline(args: argparse.Namespace) -> int:
    from .experiment import stage_baseline_sweep, stage_evaluate
    cfg = _load_cfg(args)
    if args.sweep:
        path = stage_baseline_sweep(cfg)
        print(path.read_text())
        return 0
    report = stage_evaluate(cfg, _run_ids(args, cfg), with_baseline=True,
                            with_encoder=False)
    print(report.read_text())
    return 0


def _cmd_attribute(args: argparse.Namespace) -> int:
    from .attribution import (integrated_gradients, pair_distance_target,
                              render_attribution)
    from .catalog import save_image
    from .encoder import embed_frame, load_checkpoint
    from .experiment import checkpoint_path, load_clips, make_roi_loader
    from .triplets import preprocess_image
    cfg = _load_cfg(args)
    ckpt = args.checkpoint or checkpoint_path(cfg, args.run)
    model, _ = load_checkpoint(ckpt)
    clips = [c for c in load_clips(cfg) if c.clip_id == args.clip_id]
    if not clips:
        raise ValueError(f"clip {args.clip_id!r} not found under "
                         f"{cfg.dataset.root}")
    clip = clips[0]
    for idx in (args.frame, args.baseline_frame):
        if idx is not None and not 0 <= idx < len(clip):
            raise ValueError(f"frame {idx} out of range for {clip.clip_id}"
                             f" ({len(clip)} frames)")
    roi_loader = make_roi_loader(cfg)
    tensor = preprocess_image(roi_loader(clip, args.frame))
    kwargs = {"steps": args.steps}
    if args.baseline_frame is not None:
        # walk the path from the partner frame, attribute its pair distance
        partner = preprocess_image(roi_loader(clip, args.baseline_frame))
        kwargs["baseline"] = partner
        kwargs["target"] = pair_distance_target(embed_frame(model, partner))
    attr = integrated_gradients(model.net, tensor, **kwargs)
    import cv2
    roi = roi_loader(clip, args.frame)
    roi_net = cv2.resize(roi, (tensor.shape[2], tensor.shape[1]))
    overlay = render_attribution(attr, roi_net)
    save_image(args.out_image, overlay)
    print(f"attribution overlay written to {args.out_image}")
    return 0


# ---------------------------------------------------------------------------


def run_command(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
