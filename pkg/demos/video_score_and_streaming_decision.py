"""
How the video score and the streaming decision behave
=====================================================

No dataset or training here, just the decision layer on hand-built
embeddings. A genuine hologram makes the frame embeddings drift as the
document tilts; a printed copy gives near-identical frames. The video
score is the mean pairwise cosine distance, so static clips score near
zero and the decision rule is: attack iff score < threshold.
"""

import numpy as np

from holocheck.decision import (CalibrationResult, calibrate_threshold,
                                decide_cumulative, video_score)

rng = np.random.default_rng(0)

# static clip: one direction plus tiny noise -> score near 0
base = rng.normal(size=16)
static = np.stack([base + 0.01 * rng.normal(size=16) for _ in range(8)])
print(f"static clip score      {video_score(static):.4f}")

# dynamic clip: embeddings walk around the sphere -> much larger score
steps = [base.copy()]
for _ in range(7):
    steps.append(steps[-1] + 0.8 * rng.normal(size=16))
dynamic = np.stack(steps)
print(f"dynamic clip score     {video_score(dynamic):.4f}")

# orthogonal frames are the extreme case: cosine distance 1 per pair
e1, e2 = np.eye(2)
print(f"alternating basis score {video_score(np.stack([e1, e2, e1, e2])):.4f}")

# calibration sweeps threshold candidates and keeps the best
# validation F-score; ties go to the smallest threshold
val = [(0.02, "attack"), (0.05, "attack"), (0.31, "original"),
       (0.44, "original"), (0.09, "attack"), (0.27, "original")]
cal = calibrate_threshold(val)
print(f"calibrated threshold {cal.threshold:.3f} "
      f"F {cal.validation_fscore:.3f}")

# streaming mode scores growing prefixes once a 5-frame buffer fills and
# accepts at the first prefix that clears the threshold
clip = [e1 if t % 2 == 0 else e2 for t in range(8)]
for t in range(4, 8):
    print(f"  prefix of {t + 1}: score {video_score(np.stack(clip[:t + 1])):.3f}")
verdict, stop = decide_cumulative(clip, CalibrationResult(0.5, 1.0))
print(f"streaming verdict: {verdict} at frame index {stop}")

# a static stream never clears the bar, so it runs to the end
flat = [e1] * 10
verdict, stop = decide_cumulative(flat, CalibrationResult(0.5, 1.0))
print(f"static stream:     {verdict} at frame index {stop}")
