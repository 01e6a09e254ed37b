"""Triplet-loss training of the frame encoder, plus the classifier ablation.

The encoder is a bare backbone: its globally pooled features are the
embedding, no projection head. The loss is the margin triplet loss on raw
Euclidean distances,

    l = max(||a - p||_2 - ||a - n||_2 + m, 0),  batch mean,  m = 1,

optimized with AdamW at its stock hyperparameters. Epoch selection runs on
the validation set: either the best post-calibration F-score of the
decision stage, or (for originals-only training, where no attacks exist to
calibrate against) the negated mean triplet loss over original-clip frame
pairs. Everything is reproducible from TrainConfig.seed.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .backbones import ARCHITECTURES, build_backbone
from .catalog import ClipRecord
from .decision import EmbeddingSequence, calibrate_threshold, video_score
from .triplets import AugConfig, RoiLoader, augment_image, build_epoch, \
    preprocess_image

log = logging.getLogger(__name__)

SELECTION_MODES = ("fscore", "originals_loss")


@dataclass
class EncoderModel:
    architecture: str
    net: nn.Module
    embedding_dim: int
    init: str = "scratch"


@dataclass
class ClassifierModel:
    architecture: str
    net: nn.Module
    init: str = "scratch"


@dataclass
class TrainConfig:
    architecture: str = "mobilenetv3_small050"
    init: str = "scratch"
    margin: float = 1.0
    max_epochs: int = 20
    batch_size: int = 32
    seed: int = 0
    mode: str = "contrastive"        # contrastive | classifier
    train_data: str = "full"         # full | originals_only
    selection: str | None = None     # None -> fscore when attacks exist
    aug: AugConfig = field(default_factory=AugConfig)

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}")
        if self.margin < 0:
            raise ValueError("margin must be >= 0")
        if self.max_epochs < 1 or self.batch_size < 1:
            raise ValueError("max_epochs and batch_size must be >= 1")
        if self.mode not in ("contrastive", "classifier"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.train_data not in ("full", "originals_only"):
            raise ValueError(f"unknown train_data {self.train_data!r}")
        if self.selection is not None and \
                self.selection not in SELECTION_MODES:
            raise ValueError(f"unknown selection {self.selection!r}")


def triplet_loss(a: torch.Tensor, p: torch.Tensor, n: torch.Tensor,
                 margin: float = 1.0) -> torch.Tensor:
    """max(d(a,p) - d(a,n) + m, 0) on L2 distances; mean over the batch."""
    d_ap = torch.linalg.vector_norm(a - p, dim=-1)
    d_an = torch.linalg.vector_norm(a - n, dim=-1)
    return torch.clamp(d_ap - d_an + margin, min=0.0).mean()


# ---------------------------------------------------------------------------
# inference paths


def embed_frame(model: EncoderModel, image: torch.Tensor) -> np.ndarray:
    """Embed one normalized 224 input (or a batch of them)."""
    single = image.ndim == 3
    batch = image.unsqueeze(0) if single else image
    if batch.ndim != 4 or batch.shape[1] != 3:
        raise ValueError(f"expected (N, 3, H, W) input, got "
                         f"{tuple(image.shape)}")
    model.net.eval()
    with torch.no_grad():
        out = model.net(batch)
    if out.shape[-1] != model.embedding_dim:
        raise RuntimeError("backbone output width changed under my feet")
    arr = out.numpy()
    return arr[0] if single else arr


def embed_clip(model: EncoderModel, clip: ClipRecord, roi_loader: RoiLoader,
               batch_size: int = 32,
               aug_cfg: AugConfig | None = None) -> EmbeddingSequence:
    """Per-frame embeddings over the whole clip, inference preprocessing."""
    cfg = aug_cfg or AugConfig(enabled=False)
    tensors = [preprocess_image(roi_loader(clip, f.index), cfg)
               for f in clip.frames]
    chunks = []
    for k in range(0, len(tensors), batch_size):
        chunks.append(embed_frame(model, torch.stack(tensors[k:k + batch_size])))
    return EmbeddingSequence(clip_id=clip.clip_id,
                             vectors=np.concatenate(chunks, axis=0))


def _originals_pair_loss(model: EncoderModel, clips: list[ClipRecord],
                         roi_loader: RoiLoader, margin: float) -> float:
    """Mean triplet loss over (f_t, f_t, f_{t+1}) validation triplets.

    Without augmentation anchor equals positive, so each term reduces to
    max(m - ||v_t - v_{t+1}||, 0).
    """
    losses = []
    for clip in clips:
        seq = embed_clip(model, clip, roi_loader)
        vec = seq.vectors
        for t in range(len(vec) - 1):
            d = float(np.linalg.norm(vec[t] - vec[t + 1]))
            losses.append(max(margin - d, 0.0))
    if not losses:
        raise ValueError("no frame pairs in validation originals")
    return float(np.mean(losses))


def validation_criterion(model: EncoderModel, val_clips: list[ClipRecord],
                         mode: str, roi_loader: RoiLoader,
                         margin: float = 1.0) -> float:
    """Higher-is-better epoch selection score on the validation set."""
    if mode == "fscore":
        scored = [(video_score(embed_clip(model, c, roi_loader)), c.label)
                  for c in val_clips]
        return calibrate_threshold(scored).validation_fscore
    if mode == "originals_loss":
        originals = [c for c in val_clips if c.label == "original"]
        return -_originals_pair_loss(model, originals, roi_loader, margin)
    raise ValueError(f"unknown selection mode {mode!r}")


# ---------------------------------------------------------------------------
# training


def _select_mode(cfg: TrainConfig, val_clips: list[ClipRecord]) -> str:
    if cfg.selection is not None:
        return cfg.selection
    labels = {c.label for c in val_clips}
    return "fscore" if len(labels) > 1 and cfg.train_data == "full" \
        else "originals_loss"


def _triplet_batches(train_clips: list[ClipRecord], cfg: TrainConfig,
                     epoch: int, roi_loader: RoiLoader):
    """Yield the epoch's triplet batches as single (3k, 3, H, W) tensors.

    Anchors, positives and negatives ride in one tensor so batch norm sees
    them together; chunk(3) splits them back after the forward pass. Seeded
    per (seed, epoch), so a second call replays identical batches.
    """
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 101, epoch]))
    for batch in build_epoch(train_clips, cfg.aug, cfg.batch_size, rng,
                             roi_loader):
        yield torch.cat([torch.stack([t.anchor for t in batch]),
                         torch.stack([t.positive for t in batch]),
                         torch.stack([t.negative for t in batch])])


def _refresh_norm_stats(net: nn.Module, batches) -> None:
    """Recompute batch-norm running statistics exactly over ``batches``.

    A scratch-initialized backbone keeps train and eval mode far apart for
    the first few hundred optimizer steps: running estimates start at
    (0, 1) while the true activation scale deep in the stack is orders of
    magnitude smaller, so freshly learned offsets swamp the eval-mode
    signal and the embeddings go flat. A cumulative pass over the epoch's
    inputs brings the estimates in line with what training actually saw;
    on long schedules the estimates converge there on their own and this
    pass changes nothing.
    """
    norms = [m for m in net.modules()
             if isinstance(m, nn.modules.batchnorm._BatchNorm)]
    if not norms:
        return
    saved = [m.momentum for m in norms]
    net.eval()              # dropout etc. stay in inference behavior
    for m in norms:
        m.reset_running_stats()
        m.momentum = None   # cumulative average instead of exponential
        m.train()
    with torch.no_grad():
        for x in batches:
            net(x)
    for m, momentum in zip(norms, saved):
        m.momentum = momentum


def train(train_clips: list[ClipRecord], val_clips: list[ClipRecord],
          cfg: TrainConfig, roi_loader: RoiLoader
          ) -> tuple[EncoderModel, list[dict]]:
    """Optimize the encoder, return the best-validation-epoch checkpoint."""
    if not train_clips:
        raise ValueError("empty train set")
    if cfg.train_data == "originals_only":
        train_clips = [c for c in train_clips if c.label == "original"]
        if not train_clips:
            raise ValueError("originals_only training with no originals")
    selection = _select_mode(cfg, val_clips)

    torch.manual_seed(cfg.seed)
    net, dim = build_backbone(cfg.architecture, cfg.init)
    model = EncoderModel(architecture=cfg.architecture, net=net,
                         embedding_dim=dim, init=cfg.init)
    opt = torch.optim.AdamW(net.parameters())

    history: list[dict] = []
    best_state, best_criterion, best_epoch = None, -np.inf, -1
    for epoch in range(1, cfg.max_epochs + 1):
        net.train()
        epoch_losses = []
        for b, stacked in enumerate(_triplet_batches(train_clips, cfg,
                                                     epoch, roi_loader)):
            feats = net(stacked)
            f_a, f_p, f_n = feats.chunk(3)
            loss = triplet_loss(f_a, f_p, f_n, cfg.margin)
            if not torch.isfinite(loss):
                raise RuntimeError(
                    f"training diverged: non-finite loss at epoch {epoch}, "
                    f"batch {b}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            epoch_losses.append(loss.item())

        _refresh_norm_stats(net, _triplet_batches(train_clips, cfg, epoch,
                                                  roi_loader))
        net.eval()
        criterion = validation_criterion(model, val_clips, selection,
                                         roi_loader, cfg.margin)
        history.append({"epoch": epoch,
                        "train_loss": float(np.mean(epoch_losses)),
                        "val_criterion": criterion})
        log.info("epoch %d/%d  train loss %.4f  val %s %.4f", epoch,
                 cfg.max_epochs, history[-1]["train_loss"], selection,
                 criterion)
        # ties go to the later epoch: same validation score, more training
        if criterion >= best_criterion:
            best_criterion, best_epoch = criterion, epoch
            best_state = copy.deepcopy(net.state_dict())

    net.load_state_dict(best_state)
    net.eval()
    log.info("selected epoch %d (%s %.4f)", best_epoch, selection,
             best_criterion)
    return model, history


# ---------------------------------------------------------------------------
# classifier ablation


def _classifier_batches(usable: list[ClipRecord], cfg: TrainConfig,
                        epoch: int, roi_loader: RoiLoader):
    """Yield (images, targets) batches: one random frame per clip, augmented.

    Seeded per (seed, epoch) like _triplet_batches, replayable the same way.
    """
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 202, epoch]))
    order = rng.permutation(len(usable))
    for k in range(0, len(order), cfg.batch_size):
        chunk = [usable[int(i)] for i in order[k:k + cfg.batch_size]]
        images, targets = [], []
        for clip in chunk:
            t = int(rng.integers(len(clip)))
            images.append(augment_image(roi_loader(clip, t), cfg.aug, rng))
            targets.append(0 if clip.label == "original" else 1)
        yield torch.stack(images), torch.tensor(targets)


def train_classifier(train_clips: list[ClipRecord],
                     val_clips: list[ClipRecord], cfg: TrainConfig,
                     roi_loader: RoiLoader
                     ) -> tuple[ClassifierModel, list[dict]]:
    """Per-frame original/attack softmax head under the same augmentations."""
    labels = {c.label for c in train_clips}
    if len(labels) < 2:
        raise ValueError("classifier training needs both labels")

    torch.manual_seed(cfg.seed)
    backbone, dim = build_backbone(cfg.architecture, cfg.init)
    net = nn.Sequential(backbone, nn.Linear(dim, 2))
    model = ClassifierModel(architecture=cfg.architecture, net=net,
                            init=cfg.init)
    opt = torch.optim.AdamW(net.parameters())
    ce = nn.CrossEntropyLoss()

    usable = [c for c in train_clips if c.attack_kind != "photo_replacement"]
    history: list[dict] = []
    best_state, best_acc = None, -1.0
    for epoch in range(1, cfg.max_epochs + 1):
        net.train()
        losses = []
        for images, targets in _classifier_batches(usable, cfg, epoch,
                                                   roi_loader):
            logits = net(images)
            loss = ce(logits, targets)
            if not torch.isfinite(loss):
                raise RuntimeError(f"classifier diverged at epoch {epoch}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(loss.item())

        _refresh_norm_stats(net, (x for x, _ in _classifier_batches(
            usable, cfg, epoch, roi_loader)))
        net.eval()
        acc = _frame_accuracy(model, val_clips, roi_loader)
        history.append({"epoch": epoch, "train_loss": float(np.mean(losses)),
                        "val_criterion": acc})
        log.info("classifier epoch %d/%d  loss %.4f  val acc %.4f", epoch,
                 cfg.max_epochs, history[-1]["train_loss"], acc)
        if acc >= best_acc:
            best_acc = acc
            best_state = copy.deepcopy(net.state_dict())

    net.load_state_dict(best_state)
    net.eval()
    return model, history


def classifier_frame_probs(model: ClassifierModel, clip: ClipRecord,
                           roi_loader: RoiLoader,
                           batch_size: int = 32) -> np.ndarray:
    """Per-frame attack probabilities in [0, 1]."""
    tensors = [preprocess_image(roi_loader(clip, f.index))
               for f in clip.frames]
    probs = []
    model.net.eval()
    with torch.no_grad():
        for k in range(0, len(tensors), batch_size):
            logits = model.net(torch.stack(tensors[k:k + batch_size]))
            probs.append(torch.softmax(logits, dim=1)[:, 1].numpy())
    return np.concatenate(probs)


def _frame_accuracy(model: ClassifierModel, clips: list[ClipRecord],
                    roi_loader: RoiLoader) -> float:
    correct, total = 0, 0
    for clip in clips:
        if clip.attack_kind == "photo_replacement":
            continue
        probs = classifier_frame_probs(model, clip, roi_loader)
        want_attack = clip.label == "attack"
        correct += int(((probs >= 0.5) == want_attack).sum())
        total += len(probs)
    if total == 0:
        raise ValueError("no usable validation frames")
    return correct / total


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path: Path | str, model: EncoderModel | ClassifierModel,
                    extra: dict | None = None) -> None:
    payload = {
        "kind": "encoder" if isinstance(model, EncoderModel) else "classifier",
        "architecture": model.architecture,
        "init": model.init,
        "state_dict": model.net.state_dict(),
        "extra": extra or {},
    }
    if isinstance(model, EncoderModel):
        payload["embedding_dim"] = model.embedding_dim
    torch.save(payload, path)


def load_checkpoint(path: Path | str
                    ) -> tuple[EncoderModel | ClassifierModel, dict]:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    arch, init = payload["architecture"], payload["init"]
    if payload["kind"] == "encoder":
        net, dim = build_backbone(arch, "scratch")
        net.load_state_dict(payload["state_dict"])
        net.eval()
        if dim != payload["embedding_dim"]:
            raise ValueError("checkpoint embedding_dim mismatch")
        model: EncoderModel | ClassifierModel = EncoderModel(
            architecture=arch, net=net, embedding_dim=dim, init=init)
    else:
        backbone, dim = build_backbone(arch, "scratch")
        net = nn.Sequential(backbone, nn.Linear(dim, 2))
        net.load_state_dict(payload["state_dict"])
        net.eval()
        model = ClassifierModel(architecture=arch, net=net, init=init)
    return model, payload.get("extra", {})
