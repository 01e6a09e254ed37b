"""Weak-label triplet sampling and the augmentation pipeline.

Labels are weak: we only know whether a clip is an original or an attack,
never which frames show the hologram. Original clips exploit temporal
variation: anchor and positive are the same frame t (differentiated by
augmentation), the negative is frame t+1 of the same clip. Attack clips
exploit cross-clip appearance gaps: anchor and positive are uniform frames
of one clip, the negative a uniform frame of a different clip of the same
identity. Photo-replacement clips never contribute triplets.

Augmentation: one shared geometric draw (90-degree rotations or mirrors)
applied identically to anchor/positive/negative, then per-image crop, blur
and color jitter. Output is a normalized float tensor ready for the
encoder; with augmentation disabled the images are only resized and
normalized, which makes anchor and positive byte-identical for original
triplets.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import cv2
import numpy as np
import torch

from .catalog import ClipRecord

log = logging.getLogger(__name__)

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)
NET_INPUT_SIZE = 224

RoiLoader = Callable[[ClipRecord, int], np.ndarray]


@dataclass
class AugConfig:
    enabled: bool = True
    geometric_prob: float = 0.5
    crop_prob: float = 1.0
    crop_ratio: float = 0.8
    out_size: int = NET_INPUT_SIZE
    blur_prob: float = 0.4
    blur_kernels: tuple[int, ...] = (5, 7, 9)
    blur_sigma: tuple[float, float] = (2.0, 10.0)
    jitter_prob: float = 0.4
    brightness: tuple[float, float] = (0.7, 1.3)
    contrast: tuple[float, float] = (0.9, 1.1)
    saturation: tuple[float, float] = (0.95, 1.05)
    mean: tuple[float, float, float] = IMAGENET_MEAN
    std: tuple[float, float, float] = IMAGENET_STD

    def __post_init__(self):
        for p in (self.geometric_prob, self.crop_prob, self.blur_prob,
                  self.jitter_prob):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability {p} outside [0, 1]")
        if not 0.0 < self.crop_ratio <= 1.0:
            raise ValueError("crop ratio outside (0, 1]")
        for k in self.blur_kernels:
            if k % 2 == 0:
                raise ValueError("blur kernel sizes must be odd")


@dataclass
class Provenance:
    identity: str
    anchor_clip: str
    anchor_frame: int
    positive_clip: str
    positive_frame: int
    negative_clip: str
    negative_frame: int


@dataclass
class Triplet:
    """Anchor/positive/negative images; uint8 HxWx3 raw, CxHxW tensors after
    augmentation."""

    anchor: np.ndarray | torch.Tensor
    positive: np.ndarray | torch.Tensor
    negative: np.ndarray | torch.Tensor
    source_label: str
    provenance: Provenance

    def __post_init__(self):
        if self.source_label not in ("original", "attack"):
            raise ValueError(f"bad source label {self.source_label!r}")


# ---------------------------------------------------------------------------
# sampling


def sample_original_triplet(clip: ClipRecord, t: int | None,
                            rng: np.random.Generator,
                            roi_loader: RoiLoader) -> Triplet:
    """Anchor/positive = ROI of frame t, negative = ROI of frame t+1."""
    if clip.label != "original":
        raise ValueError(f"{clip.clip_id}: not an original clip")
    if len(clip) < 2:
        raise ValueError(f"{clip.clip_id}: clip too short")
    if t is None:
        t = int(rng.integers(len(clip) - 1))
    if not 0 <= t < len(clip) - 1:
        raise ValueError(f"{clip.clip_id}: frame {t} has no successor")
    img_t = roi_loader(clip, t)
    img_next = roi_loader(clip, t + 1)
    return Triplet(
        anchor=img_t, positive=img_t.copy(), negative=img_next,
        source_label="original",
        provenance=Provenance(identity=clip.identity,
                              anchor_clip=clip.clip_id, anchor_frame=t,
                              positive_clip=clip.clip_id, positive_frame=t,
                              negative_clip=clip.clip_id,
                              negative_frame=t + 1))


def sample_attack_triplet(identity_clips: Sequence[ClipRecord],
                          rng: np.random.Generator,
                          roi_loader: RoiLoader) -> Triplet:
    """Anchor/positive from one attack clip, negative from another one."""
    clips = [c for c in identity_clips
             if c.label == "attack" and c.attack_kind != "photo_replacement"]
    identities = {c.identity for c in clips}
    if len(identities) > 1:
        raise ValueError(f"clips span several identities: {sorted(identities)}")
    if len(clips) < 2:
        ident = next(iter(identities)) if identities else "?"
        raise ValueError(f"insufficient clips for identity {ident!r}")
    a_idx = int(rng.integers(len(clips)))
    others = [c for k, c in enumerate(clips) if k != a_idx]
    n_clip = others[int(rng.integers(len(others)))]
    a_clip = clips[a_idx]
    ta = int(rng.integers(len(a_clip)))
    tp = int(rng.integers(len(a_clip)))
    tn = int(rng.integers(len(n_clip)))
    return Triplet(
        anchor=roi_loader(a_clip, ta), positive=roi_loader(a_clip, tp),
        negative=roi_loader(n_clip, tn), source_label="attack",
        provenance=Provenance(identity=a_clip.identity,
                              anchor_clip=a_clip.clip_id, anchor_frame=ta,
                              positive_clip=a_clip.clip_id, positive_frame=tp,
                              negative_clip=n_clip.clip_id, negative_frame=tn))


# ---------------------------------------------------------------------------
# augmentation

_GEOMETRIC_OPS = ("rot90", "rot180", "rot270", "mirror_h", "mirror_v")


def _apply_geometric(img: np.ndarray, op: str) -> np.ndarray:
    if op == "rot90":
        out = np.rot90(img, 1)
    elif op == "rot180":
        out = np.rot90(img, 2)
    elif op == "rot270":
        out = np.rot90(img, 3)
    elif op == "mirror_h":
        out = img[:, ::-1]
    elif op == "mirror_v":
        out = img[::-1, :]
    else:
        raise ValueError(f"unknown geometric op {op!r}")
    return np.ascontiguousarray(out)


def _random_crop(img: np.ndarray, cfg: AugConfig,
                 rng: np.random.Generator) -> np.ndarray:
    h, w = img.shape[:2]
    side = int(round(cfg.crop_ratio * min(h, w)))
    y0 = int(rng.integers(h - side + 1))
    x0 = int(rng.integers(w - side + 1))
    patch = img[y0:y0 + side, x0:x0 + side]
    return cv2.resize(patch, (cfg.out_size, cfg.out_size),
                      interpolation=cv2.INTER_LINEAR)


def _color_jitter(img: np.ndarray, cfg: AugConfig,
                  rng: np.random.Generator) -> np.ndarray:
    """Brightness/contrast/saturation on a float [0, 1] image."""
    b = rng.uniform(*cfg.brightness)
    c = rng.uniform(*cfg.contrast)
    s = rng.uniform(*cfg.saturation)
    out = img * b
    gray = (0.299 * out[:, :, 0] + 0.587 * out[:, :, 1]
            + 0.114 * out[:, :, 2])
    out = (out - gray.mean()) * c + gray.mean()
    gray = (0.299 * out[:, :, 0] + 0.587 * out[:, :, 1]
            + 0.114 * out[:, :, 2])[:, :, None]
    out = gray + (out - gray) * s
    return np.clip(out, 0.0, 1.0)


def _normalize(img01: np.ndarray, cfg: AugConfig) -> torch.Tensor:
    arr = (img01 - np.asarray(cfg.mean, dtype=np.float32)) \
        / np.asarray(cfg.std, dtype=np.float32)
    return torch.from_numpy(np.ascontiguousarray(
        arr.transpose(2, 0, 1).astype(np.float32)))


def preprocess_image(img: np.ndarray,
                     cfg: AugConfig | None = None) -> torch.Tensor:
    """Inference-path transform: resize to the net input and normalize."""
    cfg = cfg or AugConfig(enabled=False)
    resized = cv2.resize(img, (cfg.out_size, cfg.out_size),
                         interpolation=cv2.INTER_LINEAR)
    return _normalize(resized.astype(np.float32) / 255.0, cfg)


def _augment_one(img: np.ndarray, cfg: AugConfig,
                 rng: np.random.Generator) -> torch.Tensor:
    if rng.random() < cfg.crop_prob:
        img = _random_crop(img, cfg, rng)
    else:
        img = cv2.resize(img, (cfg.out_size, cfg.out_size),
                         interpolation=cv2.INTER_LINEAR)
    if rng.random() < cfg.blur_prob:
        k = int(cfg.blur_kernels[int(rng.integers(len(cfg.blur_kernels)))])
        sigma = float(rng.uniform(*cfg.blur_sigma))
        img = cv2.GaussianBlur(img, (k, k), sigma)
    out = img.astype(np.float32) / 255.0
    if rng.random() < cfg.jitter_prob:
        out = _color_jitter(out, cfg, rng)
    return _normalize(out, cfg)


def augment_image(img: np.ndarray, cfg: AugConfig,
                  rng: np.random.Generator) -> torch.Tensor:
    """Single-image chain (classifier ablation path); no sharing needed."""
    if not cfg.enabled:
        return preprocess_image(img, cfg)
    if rng.random() < cfg.geometric_prob:
        op = _GEOMETRIC_OPS[int(rng.integers(len(_GEOMETRIC_OPS)))]
        img = _apply_geometric(img, op)
    return _augment_one(img, cfg, rng)


def augment_triplet(triplet: Triplet, cfg: AugConfig,
                    rng: np.random.Generator) -> Triplet:
    """Shared geometric draw, then independent per-image photometric chain."""
    imgs = [triplet.anchor, triplet.positive, triplet.negative]
    if not cfg.enabled:
        tensors = [preprocess_image(im, cfg) for im in imgs]
    else:
        if rng.random() < cfg.geometric_prob:
            op = _GEOMETRIC_OPS[int(rng.integers(len(_GEOMETRIC_OPS)))]
            imgs = [_apply_geometric(im, op) for im in imgs]
        tensors = [_augment_one(im, cfg, rng) for im in imgs]
    return Triplet(anchor=tensors[0], positive=tensors[1],
                   negative=tensors[2], source_label=triplet.source_label,
                   provenance=triplet.provenance)


# ---------------------------------------------------------------------------
# epoch assembly


def _attack_groups(clips: Sequence[ClipRecord]) -> dict[tuple[str, str],
                                                        list[ClipRecord]]:
    groups: dict[tuple[str, str], list[ClipRecord]] = {}
    for c in clips:
        if c.label == "attack" and c.attack_kind != "photo_replacement":
            groups.setdefault((c.document_model, c.identity), []).append(c)
    return groups


def build_epoch(train_clips: Sequence[ClipRecord], cfg: AugConfig,
                batch_size: int, rng: np.random.Generator,
                roi_loader: RoiLoader) -> Iterator[list[Triplet]]:
    """Yield shuffled augmented triplet batches, one triplet per source clip.

    Sources: every original clip with >= 2 frames; every attack clip whose
    identity has >= 2 usable attack clips. Fully deterministic given rng.
    """
    if batch_size < 1:
        raise ValueError("batch size must be >= 1")
    originals = [c for c in train_clips
                 if c.label == "original" and len(c) >= 2]
    groups = _attack_groups(train_clips)
    sources: list[tuple[str, object]] = [("original", c) for c in originals]
    for key, group in sorted(groups.items()):
        if len(group) >= 2:
            sources.extend(("attack", group) for _ in group)
    if not sources:
        raise ValueError("no usable triplet sources in the train set")

    order = rng.permutation(len(sources))
    batch: list[Triplet] = []
    for idx in order:
        kind, payload = sources[int(idx)]
        if kind == "original":
            raw = sample_original_triplet(payload, None, rng, roi_loader)
        else:
            raw = sample_attack_triplet(payload, rng, roi_loader)
        batch.append(augment_triplet(raw, cfg, rng))
        if len(batch) == batch_size:
            yield batch
            batch = []
    if batch:
        yield batch
