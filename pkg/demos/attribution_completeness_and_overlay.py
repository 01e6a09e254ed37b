"""
Integrated gradients: sanity axioms, then a document overlay map
===============================================================

Two quick checks that the attribution code does what the math says,
then the real use: train a small encoder on synthetic documents and ask
which pixels drive the distance between two frames of an original clip.
The answer should concentrate on the holographic overlay.
"""

import tempfile
from pathlib import Path

import cv2
import numpy as np
import torch
import torch.nn as nn

from holocheck.attribution import (completeness_gap, integrated_gradients,
                                   pair_distance_target, region_mass_ratio,
                                   render_attribution)
from holocheck.catalog import (load_roi_config, make_roi_loader, save_image,
                               scan_dataset)
from holocheck.encoder import TrainConfig, embed_clip, embed_frame, train
from holocheck.splits import clip_subsets, generate_splits
from holocheck.synthcam import SynthSpec, generate_dataset, load_meta
from holocheck.triplets import preprocess_image

# check 1: for a linear model the attribution is exactly w * (x - x'),
# independent of the number of integration steps
torch.manual_seed(0)
linear = nn.Sequential(nn.Flatten(), nn.Linear(12, 1))
x = torch.randn(3, 2, 2)
x0 = torch.randn(3, 2, 2)
want = (linear[1].weight.detach().reshape(3, 2, 2) * (x - x0)).numpy()
attr = integrated_gradients(linear, x, x0, steps=1,
                            target=lambda out: out[:, 0])
print(f"linear closed form, max abs error {np.abs(attr - want).max():.2e}")

# check 2: completeness. attributions should sum to F(x) - F(baseline)
conv = nn.Sequential(nn.Conv2d(3, 4, 3), nn.ReLU(), nn.Flatten(),
                     nn.Linear(4 * 6 * 6, 5))
image = torch.randn(3, 8, 8)
total, delta = completeness_gap(conv, image, steps=128)
print(f"completeness: sum {total:.5f} vs F(x)-F(x') {delta:.5f} "
      f"(gap {abs(total - delta) / abs(delta):.2%})")

# now on documents: tiny corpus, short training run
workdir = Path(tempfile.mkdtemp(prefix="holocheck_attr_"))
spec = SynthSpec(n_models=2, n_identities=3, frames_per_clip=8,
                 originals_per_identity=3, noise_sigma=3.0)
root = generate_dataset(spec, workdir / "data", seed=21)
clips = scan_dataset(root, "synthetic")
subsets = clip_subsets(generate_splits(clips, n_runs=1, seed=21)[0], clips)
roi_loader = make_roi_loader(load_roi_config(root / "roi.yaml"))
model, _ = train(subsets["train"], subsets["validation"],
                 TrainConfig(max_epochs=2, batch_size=8, seed=21),
                 roi_loader)

clip = next(c for c in subsets["test"] if c.label == "original")
seq = embed_clip(model, clip, roi_loader)
unit = seq.vectors / np.linalg.norm(seq.vectors, axis=1, keepdims=True)
dist = 1.0 - unit @ unit.T
i, j = np.unravel_index(int(np.argmax(dist)), dist.shape)
print(f"attributing {clip.clip_id}, frames {i} vs {j}")

# attribute the pair's cosine distance, using the partner frame as the
# baseline so the path only moves the pixels that actually changed
frame = preprocess_image(roi_loader(clip, int(i)))
partner = preprocess_image(roi_loader(clip, int(j)))
target = pair_distance_target(embed_frame(model, partner))
attr = integrated_gradients(model.net, frame, baseline=partner, steps=64,
                            target=target)

# how much of the attribution mass falls inside the known overlay rect?
meta = load_meta(root)
geo = meta["models"][clip.document_model]
rx, ry, rw, rh = geo["roi"]
ox, oy, ow, oh = geo["overlay_region"]
sx, sy = 224 / rw, 224 / rh
region = (int(round((ox - rx) * sx)), int(round((oy - ry) * sy)),
          int(round(ow * sx)), int(round(oh * sy)))
print(f"overlay-region mass ratio {region_mass_ratio(attr, region):.2f} "
      f"(1.0 would be uniform)")

roi_net = cv2.resize(roi_loader(clip, int(i)), (224, 224))
overlay = render_attribution(attr, roi_net)
out_png = workdir / "attribution_overlay.png"
save_image(out_png, overlay)
print(f"wrote {out_png}")
