"""Pixel-statistic hologram detector (the "no tracking" reference method).

Works on rectified document images at a fixed working resolution. A pixel
counts as holographic when its temporal color variation over a trailing
frame window exceeds S_thresh; the default statistic is the max-min range
of the HSV saturation channel, but it is pluggable. A clip is accepted as
original when the flagged-pixel ratio reaches h_thresh; in cumulative mode
this is re-evaluated after every frame past a five-frame minimum buffer,
with early stop on acceptance. No randomness anywhere in this module.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import cv2
import numpy as np

from .catalog import CANONICAL_SIZE, ClipRecord
from .metrics import roc_auc

log = logging.getLogger(__name__)

S_GRID = (30, 40, 50)
H_GRID = (0.01, 0.02, 0.03)

Statistic = Callable[[np.ndarray], np.ndarray]  # (T,H,W,3) -> (H,W) float
FrameProvider = Callable[[ClipRecord], Sequence[np.ndarray]]


@dataclass
class BaselineParams:
    s_thresh: float = 50.0
    h_thresh: float = 0.01
    t_window: int | None = None  # None: all frames seen so far
    min_buffer: int = 5
    working_size: tuple[int, int] = CANONICAL_SIZE

    def __post_init__(self):
        if self.s_thresh <= 0:
            raise ValueError("s_thresh must be > 0")
        if not 0.0 < self.h_thresh < 1.0:
            raise ValueError("h_thresh must be in (0, 1)")
        if self.t_window is not None and self.t_window < 2:
            raise ValueError("t_window must be >= 2")
        if self.min_buffer < 1:
            raise ValueError("min_buffer must be >= 1")


@dataclass
class BaselineDecision:
    verdict: str
    stop_index: int
    ratio: float


def saturation_range(frames: np.ndarray) -> np.ndarray:
    """Default statistic: per-pixel max-min of the saturation channel."""
    sats = np.stack([cv2.cvtColor(f, cv2.COLOR_RGB2HSV)[:, :, 1]
                     for f in frames]).astype(np.int16)
    return (sats.max(axis=0) - sats.min(axis=0)).astype(np.float32)


def holographic_map(frames: Sequence[np.ndarray], s_thresh: float,
                    statistic: Statistic = saturation_range) -> np.ndarray:
    """Boolean map of pixels whose variation statistic exceeds s_thresh."""
    if len(frames) < 2:
        raise ValueError("holographic map needs at least two frames")
    shapes = {f.shape for f in frames}
    if len(shapes) > 1:
        raise ValueError(f"mismatched frame shapes: {sorted(shapes)}")
    stack = np.stack(frames)
    return statistic(stack) > s_thresh


def flagged_ratio(frames: Sequence[np.ndarray], s_thresh: float,
                  statistic: Statistic = saturation_range) -> float:
    if len(frames) < 2:
        return 0.0
    return float(holographic_map(frames, s_thresh, statistic).mean())


def _window(frames: Sequence[np.ndarray],
            t_window: int | None) -> Sequence[np.ndarray]:
    return frames if t_window is None else frames[-t_window:]


def baseline_decide(frames: Sequence[np.ndarray], params: BaselineParams,
                    strategy: str = "cumulative",
                    statistic: Statistic = saturation_range
                    ) -> BaselineDecision:
    """Accept as original when the flagged ratio reaches h_thresh.

    ``frames`` must already be rectified to params.working_size. Cumulative
    mode evaluates the trailing window after every frame once the minimum
    buffer fills, with early stop; whole mode evaluates once.
    """
    if not frames:
        raise ValueError("empty clip")
    w, h = params.working_size
    if frames[0].shape[:2] != (h, w):
        raise ValueError(f"frames are {frames[0].shape[:2][::-1]}, expected "
                         f"working size {params.working_size}")
    if strategy == "whole":
        ratio = flagged_ratio(_window(frames, params.t_window),
                              params.s_thresh, statistic)
        verdict = "original" if ratio >= params.h_thresh else "attack"
        return BaselineDecision(verdict, len(frames) - 1, ratio)
    if strategy != "cumulative":
        raise ValueError(f"unknown strategy {strategy!r}")

    ratio = 0.0
    for i in range(len(frames)):
        if i < params.min_buffer - 1 and i < len(frames) - 1:
            continue
        ratio = flagged_ratio(_window(frames[:i + 1], params.t_window),
                              params.s_thresh, statistic)
        if i >= params.min_buffer - 1 and ratio >= params.h_thresh:
            return BaselineDecision("original", i, ratio)
    last = len(frames) - 1
    if last < params.min_buffer - 1:  # short clip: single decision at end
        verdict = "original" if ratio >= params.h_thresh else "attack"
        return BaselineDecision(verdict, last, ratio)
    return BaselineDecision("attack", last, ratio)


# ---------------------------------------------------------------------------
# parameter sweep


@dataclass
class SweepEntry:
    s_thresh: float
    h_thresh: float
    t_window: int | None
    auc: float


def parameter_sweep(clips: Sequence[ClipRecord],
                    frame_provider: FrameProvider,
                    s_grid: Sequence[float] = S_GRID,
                    h_grid: Sequence[float] = H_GRID,
                    t_grid: Sequence[int | None] = (None,)
                    ) -> tuple[list[SweepEntry], SweepEntry]:
    """ROC AUC over the (S, h, T) grid; returns all entries and the argmax.

    The per-clip score is the whole-clip flagged ratio (negated for the
    attack-positive AUC orientation). It depends on S and T but not on h,
    so rows repeat across the h axis; h still selects the operating point
    for verdict-level metrics elsewhere.
    """
    labels = [c.label for c in clips]
    if len(set(labels)) < 2:
        raise ValueError("sweep needs both classes")
    # saturation stacks are S-independent; extract once per clip
    sat_stacks = []
    for clip in clips:
        frames = frame_provider(clip)
        sat_stacks.append(np.stack(
            [cv2.cvtColor(f, cv2.COLOR_RGB2HSV)[:, :, 1]
             for f in frames]).astype(np.int16))

    entries: list[SweepEntry] = []
    best: SweepEntry | None = None
    for t_window in t_grid:
        for s in s_grid:
            scores = []
            for stack in sat_stacks:
                window = stack if t_window is None else stack[-t_window:]
                if len(window) < 2:
                    scores.append(0.0)
                    continue
                rng_map = (window.max(axis=0) - window.min(axis=0)) > s
                scores.append(float(rng_map.mean()))
            auc = roc_auc([-r for r in scores], labels)
            for h in h_grid:
                entry = SweepEntry(s, h, t_window, auc)
                entries.append(entry)
                if best is None or entry.auc > best.auc:
                    best = entry
    log.info("sweep best: S=%g h=%g T=%s AUC=%.3f", best.s_thresh,
             best.h_thresh, best.t_window, best.auc)
    return entries, best


def format_sweep_table(entries: Sequence[SweepEntry]) -> str:
    """One grid per T window: h_thresh rows, S_thresh columns."""
    by_t: dict[object, list[SweepEntry]] = {}
    for e in entries:
        by_t.setdefault(e.t_window, []).append(e)
    lines = []
    for t_window, group in by_t.items():
        s_values = sorted({e.s_thresh for e in group})
        h_values = sorted({e.h_thresh for e in group})
        lines.append(f"T = {'full clip' if t_window is None else t_window}")
        lines.append("h\\S    " + "  ".join(f"{s:6g}" for s in s_values))
        for h in h_values:
            row = [next(e.auc for e in group
                        if e.s_thresh == s and e.h_thresh == h)
                   for s in s_values]
            lines.append(f"{h:<6g} " + "  ".join(f"{a:6.3f}" for a in row))
        lines.append("")
    return "\n".join(lines).rstrip() + "\n"
