"""Procedural generator of desk-scale ID-document video clips.

Writes the same directory layout :func:`holocheck.catalog.scan_dataset`
consumes, so the whole pipeline is testable without the real datasets. Each
document model gets a seeded background plus a face patch per identity; clips
are rendered in the canonical document plane and then projected into camera
frames under a smoothly wobbling homography, with the exact projected quad
written as the annotation.

Overlay kinds per clip:

* ``dynamic_holo``  — pseudo-holographic patch whose hue cycles and whose
  lobes slide from frame to frame (originals).
* ``none``          — no overlay ("copy without holo").
* ``static_holo``   — overlay frozen at its first appearance ("pseudo holo copy").
* ``desaturated_copy`` — grayscale document with a frozen overlay ("photo holo copy").
* ``photo_replacement`` — dynamic overlay rendered far outside the face ROI,
  nothing over the face.

Optional nuisance knobs (all default off): global illumination wobble (one
shared gain per frame, so brightness flickers but color balance holds), a
small drifting white balance (independent per-channel gains), additive
sensor noise, and focus breathing (a per-frame defocus blur that waxes and
wanes like a hunting autofocus). With all of them off, static clips are
pixel-constant at the composition level.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, asdict
from pathlib import Path

import cv2
import numpy as np

from .catalog import (CANONICAL_SIZE, FRAUD_KINDS, RoiSpec, canonical_corners,
                      save_image, save_roi_config)

log = logging.getLogger(__name__)

OVERLAY_KINDS = ("dynamic_holo", "none", "static_holo", "desaturated_copy",
                 "photo_replacement")

# attack_kind (catalog taxonomy) -> overlay kind rendered
OVERLAY_FOR_ATTACK = {
    "copy_without_holo": "none",
    "pseudo_holo_copy": "static_holo",
    "photo_holo_copy": "desaturated_copy",
    "photo_replacement": "photo_replacement",
}


@dataclass
class SynthSpec:
    """Parameters of a generated dataset."""

    n_models: int = 2
    n_identities: int = 5
    frames_per_clip: int = 12
    fps: float = 5.0
    originals_per_identity: int = 3
    attack_kinds: tuple[str, ...] = FRAUD_KINDS
    frame_size: tuple[int, int] = (640, 400)
    canonical_size: tuple[int, int] = CANONICAL_SIZE
    hue_speed: float = 23.0          # overlay hue degrees per frame
    camera_wobble: float = 0.035     # corner wobble, fraction of document width
    illumination_amplitude: float = 0.0  # shared gain wobble, 0 = off
    chroma_amplitude: float = 0.0        # per-channel gain wobble, 0 = off
    noise_sigma: float = 0.0             # additive sensor noise, 0 = off
    focus_amplitude: float = 0.0         # focus-breathing peak sigma, 0 = off

    def __post_init__(self):
        if self.n_models < 1 or self.n_identities < 1:
            raise ValueError("need at least one model and one identity")
        if self.frames_per_clip < 2:
            raise ValueError("clips need at least two frames")
        if self.fps <= 0:
            raise ValueError("fps must be > 0")
        for kind in self.attack_kinds:
            if kind not in FRAUD_KINDS:
                raise ValueError(f"unknown attack kind {kind!r}")


@dataclass
class ModelGeometry:
    """Canonical-plane rectangles of one document model (x, y, w, h)."""

    face_rect: tuple[int, int, int, int]
    roi: tuple[int, int, int, int]
    overlay_region: tuple[int, int, int, int]
    replacement_region: tuple[int, int, int, int]


@dataclass
class ClipRecipe:
    """All per-clip random draws, frozen so rendering is a pure function."""

    overlay_kind: str
    hue_phase: float
    pulse_phase: float
    lobe_phases: tuple[float, float, float, float]
    illum_amp: float
    illum_freq: float
    illum_phase: float
    chroma_amp: tuple[float, float, float]
    chroma_freq: tuple[float, float, float]
    chroma_phase: tuple[float, float, float]
    focus_amp: float
    focus_freq: float
    focus_phase: float
    drift_phase: tuple[float, float]
    corner_phases: tuple[float, ...]  # 8 values, x/y per corner
    noise_seed: int


# ---------------------------------------------------------------------------
# texture helpers


def _smooth_noise(h: int, w: int, rng: np.random.Generator,
                  cells: int = 12) -> np.ndarray:
    grid = rng.random((max(2, h // cells // 8 + 2), max(2, w // cells // 8 + 2)))
    return cv2.resize(grid.astype(np.float32), (w, h),
                      interpolation=cv2.INTER_LINEAR)


def _model_background(size: tuple[int, int],
                      rng: np.random.Generator) -> np.ndarray:
    w, h = size
    base = np.array([205, 210, 215], dtype=np.float32)
    base += rng.uniform(-18, 18, size=3).astype(np.float32)
    img = np.empty((h, w, 3), dtype=np.float32)
    for c in range(3):
        img[:, :, c] = base[c] + 26.0 * (_smooth_noise(h, w, rng) - 0.5)
    # header band with a per-model tint
    tint = rng.uniform(90, 190, size=3).astype(np.float32)
    band_h = int(0.16 * h)
    img[:band_h] = 0.5 * img[:band_h] + 0.5 * tint
    # text-like line strokes on the right half
    n_lines = 9
    x0 = int(0.42 * w)
    for i in range(n_lines):
        y = int((0.24 + 0.07 * i) * h)
        x1 = x0 + int(rng.uniform(0.25, 0.5) * w)
        cv2.line(img, (x0, y), (min(x1, w - 20), y),
                 color=(60.0, 60.0, 70.0), thickness=3)
    return np.clip(img, 0, 255)


def _face_patch(w: int, h: int, rng: np.random.Generator) -> np.ndarray:
    skin = np.array([190, 150, 120], dtype=np.float32)
    skin += rng.uniform(-25, 25, size=3).astype(np.float32)
    patch = np.empty((h, w, 3), dtype=np.float32)
    for c in range(3):
        patch[:, :, c] = skin[c] * (0.82 + 0.36 * _smooth_noise(h, w, rng, 6))
    cx, cy = w // 2, int(0.46 * h)
    axes = (int(0.32 * w), int(0.40 * h))
    cv2.ellipse(patch, (cx, cy), axes, 0, 0, 360,
                color=tuple(float(v) for v in skin * 1.12), thickness=-1)
    # hair, eyes, mouth blobs give the patch a stable facial layout
    cv2.ellipse(patch, (cx, cy - int(0.3 * h)), (axes[0], int(0.18 * h)),
                0, 180, 360, color=(55.0, 45.0, 40.0), thickness=-1)
    eye_dx = int(0.14 * w)
    for sx in (-1, 1):
        cv2.circle(patch, (cx + sx * eye_dx, cy - int(0.05 * h)),
                   max(2, int(0.035 * w)), color=(35.0, 30.0, 30.0),
                   thickness=-1)
    cv2.ellipse(patch, (cx, cy + int(0.2 * h)), (int(0.1 * w), int(0.03 * h)),
                0, 0, 180, color=(120.0, 60.0, 60.0), thickness=-1)
    return np.clip(patch, 0, 255)


def _model_geometry(spec: SynthSpec, rng: np.random.Generator) -> ModelGeometry:
    cw, ch = spec.canonical_size
    jx, jy = int(rng.uniform(-18, 18)), int(rng.uniform(-12, 12))
    face = (90 + jx, 190 + jy, 300, 360)
    roi = (70 + jx, 170 + jy, 380, 380)
    overlay = (face[0] + 150, face[1] + 50, 200, 260)
    replacement = (700, 180, 210, 260)
    # geometry assumes the default canonical size; scale otherwise
    if (cw, ch) != CANONICAL_SIZE:
        sx, sy = cw / CANONICAL_SIZE[0], ch / CANONICAL_SIZE[1]

        def scale(r):
            return (int(r[0] * sx), int(r[1] * sy),
                    max(8, int(r[2] * sx)), max(8, int(r[3] * sy)))

        face, roi, overlay, replacement = map(scale, (face, roi, overlay,
                                                      replacement))
    return ModelGeometry(face_rect=face, roi=roi, overlay_region=overlay,
                         replacement_region=replacement)


# ---------------------------------------------------------------------------
# per-clip rendering


def make_clip_recipe(spec: SynthSpec, overlay_kind: str,
                     rng: np.random.Generator) -> ClipRecipe:
    if overlay_kind not in OVERLAY_KINDS:
        raise ValueError(f"unknown overlay kind {overlay_kind!r}")
    amp = spec.illumination_amplitude
    return ClipRecipe(
        overlay_kind=overlay_kind,
        hue_phase=float(rng.uniform(0, 180)),
        pulse_phase=float(rng.uniform(0, 2 * np.pi)),
        lobe_phases=tuple(rng.uniform(0, 2 * np.pi, size=4)),
        illum_amp=float(amp * rng.uniform(0.6, 1.0)),
        illum_freq=float(rng.uniform(0.07, 0.17)),
        illum_phase=float(rng.uniform(0, 2 * np.pi)),
        chroma_amp=tuple(spec.chroma_amplitude * rng.uniform(0.6, 1.0, size=3)),
        chroma_freq=tuple(rng.uniform(0.07, 0.17, size=3)),
        chroma_phase=tuple(rng.uniform(0, 2 * np.pi, size=3)),
        focus_amp=float(spec.focus_amplitude * rng.uniform(0.6, 1.0)),
        focus_freq=float(rng.uniform(0.10, 0.25)),
        focus_phase=float(rng.uniform(0, 2 * np.pi)),
        drift_phase=tuple(rng.uniform(0, 2 * np.pi, size=2)),
        corner_phases=tuple(rng.uniform(0, 2 * np.pi, size=8)),
        noise_seed=int(rng.integers(2 ** 31)),
    )


def _overlay_color(hue_deg: float) -> np.ndarray:
    # float32 HSV in OpenCV uses H in [0, 360) and S, V in [0, 1]
    hsv = np.array([[[2.0 * (hue_deg % 180.0), 0.92, 1.0]]], dtype=np.float32)
    rgb = cv2.cvtColor(hsv, cv2.COLOR_HSV2RGB)
    return 255.0 * rgb[0, 0]


def _overlay_mask(region: tuple[int, int, int, int], t: int,
                  recipe: ClipRecipe) -> np.ndarray:
    """Soft two-lobe alpha mask inside ``region``; lobes slide with t."""
    _, _, w, h = region
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float32)
    mask = np.zeros((h, w), dtype=np.float32)
    for i in range(2):
        px, py = recipe.lobe_phases[2 * i], recipe.lobe_phases[2 * i + 1]
        cx = w * (0.32 + 0.36 * i) + 0.10 * w * np.sin(0.9 * t + px)
        cy = h * (0.30 + 0.34 * i) + 0.10 * h * np.cos(0.7 * t + py)
        r2 = ((xs - cx) / (0.36 * w)) ** 2 + ((ys - cy) / (0.32 * h)) ** 2
        mask = np.maximum(mask, np.exp(-r2))
    return 0.9 * mask


def _blend_overlay(img: np.ndarray, region: tuple[int, int, int, int],
                   t: int, recipe: ClipRecipe, hue_speed: float) -> None:
    x, y, w, h = region
    # the sheen waxes and wanes so the saturation swings, not just the hue
    pulse = 0.15 + 0.85 * 0.5 * (1.0 + np.sin(0.9 * t + recipe.pulse_phase))
    alpha = pulse * _overlay_mask(region, t, recipe)[:, :, None]
    color = _overlay_color(recipe.hue_phase + hue_speed * t)
    img[y:y + h, x:x + w] = ((1.0 - alpha) * img[y:y + h, x:x + w]
                             + alpha * color)


def render_document_frame(spec: SynthSpec, base: np.ndarray,
                          geometry: ModelGeometry, recipe: ClipRecipe,
                          t: int) -> np.ndarray:
    """Compose the canonical document image for frame ``t`` (uint8 RGB)."""
    img = base.astype(np.float32).copy()
    kind = recipe.overlay_kind
    if kind == "dynamic_holo":
        _blend_overlay(img, geometry.overlay_region, t, recipe, spec.hue_speed)
    elif kind == "static_holo":
        _blend_overlay(img, geometry.overlay_region, 0, recipe, 0.0)
    elif kind == "desaturated_copy":
        _blend_overlay(img, geometry.overlay_region, 0, recipe, 0.0)
        gray = (0.299 * img[:, :, 0] + 0.587 * img[:, :, 1]
                + 0.114 * img[:, :, 2])
        img = np.clip(gray * 1.05, 0, 255)[:, :, None].repeat(3, axis=2)
    elif kind == "photo_replacement":
        _blend_overlay(img, geometry.replacement_region, t, recipe,
                       spec.hue_speed)
    elif kind != "none":
        raise ValueError(f"unknown overlay kind {kind!r}")

    if spec.illumination_amplitude > 0:
        # one shared gain: brightness flicker without a color-balance change
        gain = 1.0 + recipe.illum_amp * np.sin(
            2 * np.pi * recipe.illum_freq * t + recipe.illum_phase)
        img *= gain
    if spec.chroma_amplitude > 0:
        # small independent per-channel gains: a drifting white balance;
        # keep the amplitude well under the overlay's saturation swing or
        # the global cast starts to mimic the hologram's hue motion
        for c in range(3):
            gain = 1.0 + recipe.chroma_amp[c] * np.sin(
                2 * np.pi * recipe.chroma_freq[c] * t + recipe.chroma_phase[c])
            img[:, :, c] *= gain
    return np.clip(img, 0, 255).astype(np.uint8)


def camera_quad(spec: SynthSpec, recipe: ClipRecipe, t: int) -> np.ndarray:
    """Projected document corners (TL/TR/BR/BL) in camera pixels at frame t."""
    fw, fh = spec.frame_size
    cw, ch = spec.canonical_size
    doc_w = 0.80 * fw
    scale = doc_w / cw
    doc_h = scale * ch
    cx = fw / 2 + 0.02 * fw * np.sin(0.5 * t + recipe.drift_phase[0])
    cy = fh / 2 + 0.02 * fh * np.sin(0.4 * t + recipe.drift_phase[1])
    base = np.array([[cx - doc_w / 2, cy - doc_h / 2],
                     [cx + doc_w / 2, cy - doc_h / 2],
                     [cx + doc_w / 2, cy + doc_h / 2],
                     [cx - doc_w / 2, cy + doc_h / 2]])
    amp = spec.camera_wobble * doc_w
    offsets = np.empty((4, 2))
    for i in range(4):
        offsets[i, 0] = amp * np.sin(0.8 * t + recipe.corner_phases[2 * i])
        offsets[i, 1] = amp * np.cos(0.6 * t + recipe.corner_phases[2 * i + 1])
    return base + offsets


def render_camera_frame(spec: SynthSpec, document: np.ndarray,
                        quad: np.ndarray, background: np.ndarray,
                        noise_rng: np.random.Generator | None,
                        defocus_sigma: float = 0.0) -> np.ndarray:
    """Project the canonical document into the camera frame at ``quad``."""
    src = canonical_corners(spec.canonical_size).astype(np.float32)
    h = cv2.getPerspectiveTransform(src, quad.astype(np.float32))
    warped = cv2.warpPerspective(document, h, spec.frame_size,
                                 flags=cv2.INTER_LINEAR)
    mask = cv2.warpPerspective(
        np.ones(document.shape[:2], dtype=np.float32), h, spec.frame_size,
        flags=cv2.INTER_LINEAR)[:, :, None]
    frame = background * (1.0 - mask) + warped.astype(np.float32) * mask
    if defocus_sigma > 0.05:     # optics act before the sensor
        frame = cv2.GaussianBlur(frame, (0, 0), defocus_sigma)
    if noise_rng is not None and spec.noise_sigma > 0:
        frame = frame + noise_rng.normal(0.0, spec.noise_sigma,
                                         size=frame.shape)
    return np.clip(frame, 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# dataset generation


def _write_clip(spec: SynthSpec, clip_dir: Path, base: np.ndarray,
                geometry: ModelGeometry, recipe: ClipRecipe,
                rng: np.random.Generator) -> None:
    frames_dir = clip_dir / "frames"
    markup_dir = clip_dir / "markup"
    frames_dir.mkdir(parents=True)
    markup_dir.mkdir(parents=True)
    fw, fh = spec.frame_size
    background = np.empty((fh, fw, 3), dtype=np.float32)
    bg_level = rng.uniform(40, 90)
    for c in range(3):
        background[:, :, c] = bg_level + 35.0 * _smooth_noise(fh, fw, rng)
    noise_rng = np.random.default_rng(recipe.noise_seed)

    (clip_dir / "clip.json").write_text(json.dumps({"fps": spec.fps}))
    for t in range(spec.frames_per_clip):
        document = render_document_frame(spec, base, geometry, recipe, t)
        quad = camera_quad(spec, recipe, t)
        defocus = recipe.focus_amp * 0.5 * (1.0 + np.sin(
            2 * np.pi * recipe.focus_freq * t + recipe.focus_phase))
        frame = render_camera_frame(spec, document, quad, background,
                                    noise_rng, defocus_sigma=defocus)
        save_image(frames_dir / f"{t:04d}.png", frame)
        (markup_dir / f"{t:04d}.json").write_text(
            json.dumps({"quad": [[float(x), float(y)] for x, y in quad]}))


def generate_dataset(spec: SynthSpec, out_path: Path | str, seed: int) -> Path:
    """Write a full synthetic tree; deterministic for a given (spec, seed)."""
    out = Path(out_path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ValueError(f"cannot create output directory {out}: {exc}") from exc

    root_seq = np.random.SeedSequence([seed, 0x5EED])
    model_seqs = root_seq.spawn(spec.n_models)
    geometries: dict[str, ModelGeometry] = {}
    rois: dict[str, RoiSpec] = {}
    n_clips = 0

    for m in range(spec.n_models):
        model = f"model_{m:02d}"
        model_rng = np.random.default_rng(model_seqs[m])
        geometry = _model_geometry(spec, model_rng)
        geometries[model] = geometry
        rois[model] = RoiSpec(document_model=model, rect=geometry.roi,
                              canonical_size=spec.canonical_size)
        background = _model_background(spec.canonical_size, model_rng)

        for i in range(spec.n_identities):
            identity = f"person_{i:02d}"
            ident_rng = np.random.default_rng(
                np.random.SeedSequence([seed, 1, m, i]))
            fx, fy, fw_, fh_ = geometry.face_rect
            face = _face_patch(fw_, fh_, ident_rng)
            base = background.copy()
            base[fy:fy + fh_, fx:fx + fw_] = face

            for c in range(spec.originals_per_identity):
                clip_rng = np.random.default_rng(
                    np.random.SeedSequence([seed, 2, m, i, c]))
                recipe = make_clip_recipe(spec, "dynamic_holo", clip_rng)
                clip_dir = out / "origins" / model / identity / f"clip_{c:02d}"
                _write_clip(spec, clip_dir, base, geometry, recipe, clip_rng)
                n_clips += 1

            for a, attack in enumerate(spec.attack_kinds):
                clip_rng = np.random.default_rng(
                    np.random.SeedSequence([seed, 3, m, i, a]))
                recipe = make_clip_recipe(spec, OVERLAY_FOR_ATTACK[attack],
                                          clip_rng)
                clip_dir = out / "fraud" / attack / model / identity / "clip_00"
                _write_clip(spec, clip_dir, base, geometry, recipe, clip_rng)
                n_clips += 1

    save_roi_config(out / "roi.yaml", rois)
    meta = {
        "seed": seed,
        "spec": asdict(spec),
        "models": {m: asdict(g) for m, g in geometries.items()},
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2))
    log.info("generated %d synthetic clips under %s", n_clips, out)
    return out


def load_meta(root: Path | str) -> dict:
    return json.loads((Path(root) / "meta.json").read_text())
