"""Shared test utilities: fabricated catalogs, frame stacks, toy networks."""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from holocheck.catalog import ClipRecord, FrameRecord

UNIT_QUAD = [[0.0, 0.0], [9.0, 0.0], [9.0, 9.0], [0.0, 9.0]]


def fake_clip(clip_id: str, model: str, identity: str, label: str,
              attack_kind: str, n_frames: int = 2,
              image: np.ndarray | None = None) -> ClipRecord:
    """In-memory clip with dummy frames, for code paths that ignore pixels."""
    img = image if image is not None else np.zeros((10, 10, 3), np.uint8)
    frames = [FrameRecord(index=i, quad=UNIT_QUAD, image_data=img)
              for i in range(n_frames)]
    return ClipRecord(clip_id=clip_id, document_model=model, identity=identity,
                      label=label, attack_kind=attack_kind, fps=5.0,
                      frames=frames)


def make_fake_catalog(n_models: int = 20, n_identities: int = 5,
                      originals: int = 3) -> list[ClipRecord]:
    """Catalog with the production layout: per identity, ``originals``
    original clips plus one clip of each of the four attack kinds."""
    attacks = ("copy_without_holo", "pseudo_holo_copy", "photo_holo_copy",
               "photo_replacement")
    clips = []
    for m in range(n_models):
        model = f"model_{m:02d}"
        for i in range(n_identities):
            ident = f"person_{i:02d}"
            for c in range(originals):
                clips.append(fake_clip(f"{model}/{ident}/orig_{c}", model,
                                       ident, "original", "none"))
            for kind in attacks:
                clips.append(fake_clip(f"{model}/{ident}/{kind}", model,
                                       ident, "attack", kind))
    return clips


def random_frame_stack(rng: np.random.Generator, n: int = 8, h: int = 48,
                       w: int = 64) -> list[np.ndarray]:
    """Random uint8 RGB frames of one fake rectified clip."""
    return [rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8).astype(np.uint8)
            for _ in range(n)]


def train_toy_relu_net(seed: int = 11, steps: int = 200) -> nn.Module:
    """Small conv-ReLU net trained past its random init.

    Piecewise-linear activations keep the integrated-gradients path integral
    close to its Riemann sum, which is what the completeness checks rely on.
    """
    torch.manual_seed(seed)
    net = nn.Sequential(
        nn.Conv2d(3, 8, 3, stride=2, padding=1), nn.ReLU(),
        nn.Conv2d(8, 16, 3, stride=2, padding=1), nn.ReLU(),
        nn.AdaptiveAvgPool2d(1), nn.Flatten(), nn.Linear(16, 8))
    opt = torch.optim.AdamW(net.parameters())
    rng = np.random.default_rng(5)
    for _ in range(steps):
        a = torch.tensor(rng.normal(0.2, 1.0, (16, 3, 32, 32)),
                         dtype=torch.float32)
        b = torch.tensor(rng.normal(-0.2, 1.0, (16, 3, 32, 32)),
                         dtype=torch.float32)
        za, zb = net(a), net(b)
        loss = (za.mean() - zb.mean()).abs().neg() \
            + 0.01 * (za.norm() + zb.norm())
        opt.zero_grad()
        loss.backward()
        opt.step()
    net.eval()
    return net
