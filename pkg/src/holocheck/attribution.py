"""Integrated-gradients maps over encoder inputs.

Attribution of a scalar functional of the embedding (default: its L2 norm)
back to input pixels, via the right Riemann sum

    attr_i = (x_i - x'_i) * (1/steps) * sum_k dF(x' + (k/steps)(x - x'))/dx_i

with a black default baseline. Used to check that a trained encoder puts
its mass on the overlay region rather than the static document background.
"""

from __future__ import annotations

import logging
from typing import Callable

import cv2
import numpy as np
import torch

log = logging.getLogger(__name__)

TargetFn = Callable[[torch.Tensor], torch.Tensor]  # (N, ...) -> (N,) scalars


def embedding_norm(output: torch.Tensor) -> torch.Tensor:
    """Default scalarization: L2 norm of each embedding in the batch."""
    return torch.linalg.vector_norm(output, dim=-1)


def pair_distance_target(reference) -> TargetFn:
    """Cosine distance to a fixed reference embedding as the target.

    This is the scalar the decision stage actually aggregates, so with the
    partner frame as the baseline the attribution answers "which pixel
    changes moved this pair's score".
    """
    ref = torch.as_tensor(np.asarray(reference), dtype=torch.float32)
    norm = torch.linalg.vector_norm(ref)
    if float(norm) == 0:
        raise ValueError("reference embedding has zero norm")
    ref = ref / norm

    def target(output: torch.Tensor) -> torch.Tensor:
        unit = output / torch.linalg.vector_norm(output, dim=-1, keepdim=True)
        return 1.0 - unit @ ref

    return target


def integrated_gradients(model: torch.nn.Module, image: torch.Tensor,
                         baseline: torch.Tensor | None = None,
                         steps: int = 64,
                         target: TargetFn = embedding_norm) -> np.ndarray:
    """Attribution map with the same shape as ``image`` (C, H, W)."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if image.ndim != 3:
        raise ValueError(f"expected a (C, H, W) image, got {tuple(image.shape)}")
    if baseline is None:
        baseline = torch.zeros_like(image)
    if baseline.shape != image.shape:
        raise ValueError("baseline shape differs from input shape")

    model.eval()
    delta = image - baseline
    grad_sum = torch.zeros_like(image)
    for k in range(1, steps + 1):
        point = (baseline + (k / steps) * delta).detach().requires_grad_(True)
        scalar = target(model(point.unsqueeze(0)))[0]
        if not scalar.requires_grad:  # output independent of the input
            continue
        grad = torch.autograd.grad(scalar, point, allow_unused=True)[0]
        if grad is None:
            continue
        if not torch.isfinite(grad).all():
            raise RuntimeError(f"non-finite gradient at step {k}/{steps}")
        grad_sum += grad
    attr = (delta * grad_sum / steps).detach().numpy()
    return attr


def completeness_gap(model: torch.nn.Module, image: torch.Tensor,
                     baseline: torch.Tensor | None = None,
                     steps: int = 128,
                     target: TargetFn = embedding_norm) -> tuple[float, float]:
    """(sum of attributions, F(x) - F(baseline)) for axiom checks."""
    if baseline is None:
        baseline = torch.zeros_like(image)
    attr = integrated_gradients(model, image, baseline, steps, target)
    with torch.no_grad():
        fx = float(target(model(image.unsqueeze(0)))[0])
        fb = float(target(model(baseline.unsqueeze(0)))[0])
    return float(attr.sum()), fx - fb


def render_attribution(attr: np.ndarray, image: np.ndarray,
                       alpha: float = 0.55) -> np.ndarray:
    """Overlay |attribution| as a heat map on the uint8 RGB input."""
    if attr.ndim == 3:  # (C, H, W) -> per-pixel magnitude
        mag = np.abs(attr).sum(axis=0)
    else:
        mag = np.abs(attr)
    if mag.shape != image.shape[:2]:
        raise ValueError(f"map {mag.shape} does not match image "
                         f"{image.shape[:2]}")
    peak = mag.max()
    if peak == 0:
        return image.copy()
    norm = (255 * mag / peak).astype(np.uint8)
    heat = cv2.applyColorMap(norm, cv2.COLORMAP_JET)[:, :, ::-1]  # BGR -> RGB
    weight = alpha * (mag / peak)[:, :, None]
    out = (1 - weight) * image.astype(np.float32) + weight * heat
    return np.clip(out, 0, 255).astype(np.uint8)


def region_mass_ratio(attr: np.ndarray, region: tuple[int, int, int, int]
                      ) -> float:
    """Mean |attribution| inside an (x, y, w, h) region over mean outside."""
    mag = np.abs(attr).sum(axis=0) if attr.ndim == 3 else np.abs(attr)
    x, y, w, h = region
    mask = np.zeros(mag.shape, dtype=bool)
    mask[y:y + h, x:x + w] = True
    inside = float(mag[mask].mean())
    outside = float(mag[~mask].mean())
    if outside == 0:
        return np.inf if inside > 0 else 1.0
    return inside / outside
