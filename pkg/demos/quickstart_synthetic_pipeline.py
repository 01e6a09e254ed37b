"""
End-to-end quickstart on a small synthetic document set
=======================================================

Generates a two-model synthetic corpus, trains the frame encoder for a
few epochs, calibrates the video-score threshold on held-out identities,
and prints whole-clip verdicts for the test split. Takes a few minutes
on a laptop CPU.
"""

import tempfile
from pathlib import Path

from holocheck.catalog import load_roi_config, make_roi_loader, scan_dataset
from holocheck.decision import calibrate_threshold, decide_whole, video_score
from holocheck.encoder import TrainConfig, embed_clip, train
from holocheck.metrics import f_score
from holocheck.splits import clip_subsets, generate_splits
from holocheck.synthcam import SynthSpec, generate_dataset

workdir = Path(tempfile.mkdtemp(prefix="holocheck_demo_"))

# a deliberately small corpus: 2 document models, 4 identities each,
# 8-frame clips, originals plus the four standard attack recordings
spec = SynthSpec(n_models=2, n_identities=4, frames_per_clip=8,
                 originals_per_identity=3, hue_speed=30.0,
                 camera_wobble=0.02, noise_sigma=3.0,
                 illumination_amplitude=0.08)
root = generate_dataset(spec, workdir / "data", seed=11)
clips = scan_dataset(root, "synthetic")
print(f"generated {len(clips)} clips under {root}")

# identity-disjoint split: train/validation/test never share a person
plan = generate_splits(clips, n_runs=1, seed=11)[0]
subsets = clip_subsets(plan, clips)
for name in ("train", "validation", "test"):
    print(f"  {name:10s} {len(subsets[name])} clips")

roi_loader = make_roi_loader(load_roi_config(root / "roi.yaml"))

cfg = TrainConfig(max_epochs=5, batch_size=8, seed=11)
model, history = train(subsets["train"], subsets["validation"], cfg,
                       roi_loader)
for row in history:
    print(f"  epoch {row['epoch']}: train loss {row['train_loss']:.3f} "
          f"val criterion {row['val_criterion']:.3f}")

# calibrate: pick the threshold maximizing validation F-score.
# low video score = frames all look alike = static print = attack.
val_pairs = [(video_score(embed_clip(model, c, roi_loader)), c.label)
             for c in subsets["validation"]]
cal = calibrate_threshold(val_pairs)
print(f"threshold {cal.threshold:.4f} "
      f"(validation F {cal.validation_fscore:.3f})")

verdicts, labels = [], []
for clip in subsets["test"]:
    seq = embed_clip(model, clip, roi_loader)
    verdict = decide_whole(seq, cal)
    verdicts.append(verdict)
    labels.append(clip.label)
    mark = "ok " if verdict == clip.label else "MISS"
    print(f"  {mark} {clip.clip_id:45s} score {video_score(seq):.4f} "
          f"-> {verdict}")

prf = f_score(verdicts, labels)
print(f"test precision {prf.precision:.3f} recall {prf.recall:.3f} "
      f"F {prf.fscore:.3f}")
