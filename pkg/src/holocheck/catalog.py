"""Dataset ingestion and document-image geometry.

Walks MIDV-Holo / MIDV-2020 style directory trees (or synthetic trees written
by :mod:`holocheck.synthcam`), turns every video clip into a :class:`ClipRecord`,
rectifies frames from their annotated quads to the canonical document plane,
crops the model-specific face/hologram region of interest and normalizes the
frame rate.

Expected tree layout (``kind="midv_holo"`` and ``kind="synthetic"``)::

    <root>/
      origins/<model>/<identity>/<clip>/
          clip.json            # optional, {"fps": 5.0}
          frames/0000.png ...
          markup/0000.json ... # {"quad": [[x, y] * 4]} in source pixels
      fraud/<attack_kind>/<model>/<identity>/<clip>/   # same inner layout

``kind="midv_2020"`` uses ``clips/<model>/<identity>/<clip>/`` with the same
inner layout; every clip is an attack sample (documents without the expected
hologram).

All images are handled as R,G,B uint8; geometry helpers work in (x, y) pixel
coordinates with quads ordered clockwise from the document's top-left corner.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np
import yaml

log = logging.getLogger(__name__)

# Canonical rectified document size (width, height) and the ROI crop size fed
# towards the encoder.
CANONICAL_SIZE = (1123, 709)
ROI_SIZE = 256

LABELS = ("original", "attack")
ATTACK_KINDS = ("none", "copy_without_holo", "pseudo_holo_copy",
                "photo_holo_copy", "photo_replacement")
FRAUD_KINDS = ATTACK_KINDS[1:]

DEFAULT_FPS = {"midv_holo": 5.0, "midv_2020": 10.0, "synthetic": 5.0}

DATASET_KINDS = tuple(DEFAULT_FPS)


class CatalogError(RuntimeError):
    """Raised when a dataset tree cannot be ingested."""


# ---------------------------------------------------------------------------
# Records


@dataclass
class FrameRecord:
    """One video frame: source image plus its document quad annotation."""

    index: int
    quad: np.ndarray  # (4, 2) float64, clockwise from document top-left
    image_path: Path | None = None
    image_data: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.quad = np.asarray(self.quad, dtype=np.float64).reshape(4, 2)
        if self.index < 0:
            raise ValueError("frame index must be >= 0")
        if not is_simple_quad(self.quad):
            raise ValueError(f"frame {self.index}: quad is self-intersecting")

    @property
    def image(self) -> np.ndarray:
        """H x W x 3 uint8 RGB raster, loaded lazily when path-backed."""
        if self.image_data is not None:
            return self.image_data
        if self.image_path is None:
            raise ValueError(f"frame {self.index} has no image source")
        return load_image(self.image_path)


@dataclass
class ClipRecord:
    """One video clip with its weak label and per-frame annotations."""

    clip_id: str
    document_model: str
    identity: str
    label: str
    attack_kind: str
    fps: float
    frames: list[FrameRecord]

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"unknown label {self.label!r}")
        if self.attack_kind not in ATTACK_KINDS:
            raise ValueError(f"unknown attack kind {self.attack_kind!r}")
        if (self.label == "original") != (self.attack_kind == "none"):
            raise ValueError(
                f"clip {self.clip_id}: label {self.label!r} inconsistent with "
                f"attack kind {self.attack_kind!r}")
        if self.fps <= 0:
            raise ValueError(f"clip {self.clip_id}: fps must be > 0")
        indices = [f.index for f in self.frames]
        if sorted(indices) != indices or len(set(indices)) != len(indices):
            raise ValueError(f"clip {self.clip_id}: frames out of order")

    def __len__(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class RoiSpec:
    """Model-specific face/hologram rectangle in canonical coordinates."""

    document_model: str
    rect: tuple[int, int, int, int]  # x, y, w, h
    canonical_size: tuple[int, int] = CANONICAL_SIZE

    def __post_init__(self):
        x, y, w, h = self.rect
        cw, ch = self.canonical_size
        if w <= 0 or h <= 0:
            raise ValueError(f"roi for {self.document_model}: empty rect {self.rect}")
        if x < 0 or y < 0 or x + w > cw or y + h > ch:
            raise ValueError(
                f"roi for {self.document_model}: rect {self.rect} outside "
                f"canonical size {self.canonical_size}")


# ---------------------------------------------------------------------------
# Image and quad helpers


def load_image(path: Path | str) -> np.ndarray:
    img = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if img is None:
        raise CatalogError(f"cannot read image {path}")
    return cv2.cvtColor(img, cv2.COLOR_BGR2RGB)


def save_image(path: Path | str, image: np.ndarray) -> None:
    ok = cv2.imwrite(str(path), cv2.cvtColor(image, cv2.COLOR_RGB2BGR))
    if not ok:
        raise CatalogError(f"cannot write image {path}")


def quad_area(quad: np.ndarray) -> float:
    """Shoelace area of a 4-vertex polygon, in px^2."""
    q = np.asarray(quad, dtype=np.float64)
    x, y = q[:, 0], q[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _segments_cross(p1, p2, p3, p4) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if v == 0 else (1 if v > 0 else -1)

    return (orient(p1, p2, p3) != orient(p1, p2, p4)
            and orient(p3, p4, p1) != orient(p3, p4, p2))


def is_simple_quad(quad: np.ndarray) -> bool:
    q = np.asarray(quad, dtype=np.float64)
    # Only the two pairs of non-adjacent edges can cross.
    return not (_segments_cross(q[0], q[1], q[2], q[3])
                or _segments_cross(q[1], q[2], q[3], q[0]))


def order_quad(points: np.ndarray) -> np.ndarray:
    """Reorder 4 vertices clockwise from the top-left corner.

    Uses the coordinate sum/difference heuristic, which is unambiguous for
    document quads that are not rotated close to 45 degrees.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(4, 2)
    s = pts.sum(axis=1)
    d = pts[:, 0] - pts[:, 1]
    ordered = np.stack([
        pts[np.argmin(s)],   # top-left
        pts[np.argmax(d)],   # top-right
        pts[np.argmax(s)],   # bottom-right
        pts[np.argmin(d)],   # bottom-left
    ])
    if len({tuple(p) for p in ordered}) != 4:
        raise ValueError("ambiguous quad vertex ordering")
    return ordered


def canonical_corners(size: tuple[int, int]) -> np.ndarray:
    """Corner coordinates of the canonical document rectangle, TL/TR/BR/BL."""
    w, h = size
    return np.array([[0, 0], [w - 1, 0], [w - 1, h - 1], [0, h - 1]],
                    dtype=np.float64)


# ---------------------------------------------------------------------------
# Operations


def rectify_frame(frame: FrameRecord,
                  canonical_size: tuple[int, int] = CANONICAL_SIZE) -> np.ndarray:
    """Perspective-unwarp the document to ``canonical_size`` (bilinear)."""
    if quad_area(frame.quad) < 1.0:
        raise ValueError("degenerate quad")
    src = frame.quad.astype(np.float32)
    dst = canonical_corners(canonical_size).astype(np.float32)
    h = cv2.getPerspectiveTransform(src, dst)
    return cv2.warpPerspective(frame.image, h, canonical_size,
                               flags=cv2.INTER_LINEAR)


def extract_roi(rectified: np.ndarray, roi: RoiSpec,
                out_size: int = ROI_SIZE) -> np.ndarray:
    """Crop the ROI rectangle and resize it to ``out_size`` square."""
    cw, ch = roi.canonical_size
    if rectified.shape[0] != ch or rectified.shape[1] != cw:
        raise ValueError(
            f"rectified image {rectified.shape[1]}x{rectified.shape[0]} does "
            f"not match canonical size {cw}x{ch}")
    x, y, w, h = roi.rect
    crop = rectified[y:y + h, x:x + w]
    return cv2.resize(crop, (out_size, out_size), interpolation=cv2.INTER_LINEAR)


def resample_fps(frames: list[FrameRecord], source_fps: float,
                 target_fps: float) -> list[FrameRecord]:
    """Keep every k-th frame with k = source_fps / target_fps (integer)."""
    if source_fps < target_fps:
        raise ValueError("unsupported resampling ratio: cannot upsample")
    ratio = source_fps / target_fps
    k = int(round(ratio))
    if abs(ratio - k) > 1e-9:
        raise ValueError(f"unsupported resampling ratio {source_fps}/{target_fps}")
    return frames[::k]


def resample_clip(clip: ClipRecord, target_fps: float) -> ClipRecord:
    if abs(clip.fps - target_fps) < 1e-9:
        return clip
    frames = resample_fps(clip.frames, clip.fps, target_fps)
    return ClipRecord(clip_id=clip.clip_id, document_model=clip.document_model,
                      identity=clip.identity, label=clip.label,
                      attack_kind=clip.attack_kind, fps=target_fps,
                      frames=frames)


# ---------------------------------------------------------------------------
# Directory scanning


def _read_clip(clip_dir: Path, clip_id: str, model: str, identity: str,
               label: str, attack_kind: str, default_fps: float) -> ClipRecord:
    frames_dir = clip_dir / "frames"
    markup_dir = clip_dir / "markup"
    if not frames_dir.is_dir():
        raise CatalogError(f"clip {clip_dir}: missing frames/ directory")
    fps = default_fps
    meta_path = clip_dir / "clip.json"
    if meta_path.exists():
        try:
            fps = float(json.loads(meta_path.read_text())["fps"])
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            raise CatalogError(f"clip {clip_dir}: bad clip.json ({exc})") from exc

    frames = []
    for image_path in sorted(frames_dir.glob("*.png")):
        markup_path = markup_dir / f"{image_path.stem}.json"
        if not markup_path.exists():
            raise CatalogError(
                f"clip {clip_dir}: missing annotation {markup_path.name}")
        try:
            markup = json.loads(markup_path.read_text())
            quad = order_quad(np.asarray(markup["quad"], dtype=np.float64))
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            raise CatalogError(
                f"clip {clip_dir}: bad annotation {markup_path.name} ({exc})"
            ) from exc
        frames.append(FrameRecord(index=int(image_path.stem), quad=quad,
                                  image_path=image_path))
    if not frames:
        raise CatalogError(f"clip {clip_dir}: no frames found")
    return ClipRecord(clip_id=clip_id, document_model=model, identity=identity,
                      label=label, attack_kind=attack_kind, fps=fps,
                      frames=frames)


def _scan_subtree(root: Path, subtree: Path, label: str, attack_kind: str,
                  default_fps: float) -> list[ClipRecord]:
    clips = []
    for model_dir in sorted(p for p in subtree.iterdir() if p.is_dir()):
        for ident_dir in sorted(p for p in model_dir.iterdir() if p.is_dir()):
            for clip_dir in sorted(p for p in ident_dir.iterdir() if p.is_dir()):
                clip_id = clip_dir.relative_to(root).as_posix()
                clips.append(_read_clip(clip_dir, clip_id, model_dir.name,
                                        ident_dir.name, label, attack_kind,
                                        default_fps))
    return clips


def scan_dataset(root: Path | str, kind: str) -> list[ClipRecord]:
    """Ingest a dataset tree into ClipRecords, sorted by clip_id."""
    root = Path(root)
    if kind not in DATASET_KINDS:
        raise ValueError(f"unknown dataset kind {kind!r}")
    if not root.is_dir():
        raise CatalogError(f"dataset root {root} does not exist")
    default_fps = DEFAULT_FPS[kind]

    clips: list[ClipRecord] = []
    if kind == "midv_2020":
        clips_dir = root / "clips"
        if clips_dir.is_dir():
            clips += _scan_subtree(root, clips_dir, "attack",
                                   "copy_without_holo", default_fps)
    else:
        origins = root / "origins"
        if origins.is_dir():
            clips += _scan_subtree(root, origins, "original", "none",
                                   default_fps)
        fraud = root / "fraud"
        if fraud.is_dir():
            for kind_dir in sorted(p for p in fraud.iterdir() if p.is_dir()):
                if kind_dir.name not in FRAUD_KINDS:
                    raise CatalogError(
                        f"unknown attack folder {kind_dir.name!r} under {fraud}")
                clips += _scan_subtree(root, kind_dir, "attack", kind_dir.name,
                                       default_fps)

    clips.sort(key=lambda c: c.clip_id)
    if not clips:
        log.warning("no clips found under %s (kind=%s)", root, kind)
    else:
        counts = summarize_catalog(clips)
        log.info("scanned %d clips under %s: %d models, %d identities",
                 len(clips), root,
                 len({k[0] for k in counts}), len({k[:2] for k in counts}))
    return clips


def summarize_catalog(clips: list[ClipRecord]) -> dict[tuple[str, str, str], int]:
    """Clip counts per (document_model, identity, attack_kind)."""
    counts: dict[tuple[str, str, str], int] = {}
    for clip in clips:
        key = (clip.document_model, clip.identity, clip.attack_kind)
        counts[key] = counts.get(key, 0) + 1
    return counts


# ---------------------------------------------------------------------------
# ROI configuration


def load_roi_config(path: Path | str) -> dict[str, RoiSpec]:
    """Read the model -> rect config (YAML with x/y/w/h entries)."""
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict) or "rois" not in doc:
        raise CatalogError(f"roi config {path}: missing 'rois' section")
    size = tuple(doc.get("canonical_size", CANONICAL_SIZE))
    rois = {}
    for model, rect in doc["rois"].items():
        rois[model] = RoiSpec(document_model=model,
                              rect=(int(rect["x"]), int(rect["y"]),
                                    int(rect["w"]), int(rect["h"])),
                              canonical_size=size)
    return rois


def save_roi_config(path: Path | str, rois: dict[str, RoiSpec],
                    version: int = 1) -> None:
    models = sorted(rois)
    size = rois[models[0]].canonical_size if models else CANONICAL_SIZE
    doc = {
        "version": version,
        "canonical_size": list(size),
        "rois": {m: {"x": rois[m].rect[0], "y": rois[m].rect[1],
                     "w": rois[m].rect[2], "h": rois[m].rect[3]}
                 for m in models},
    }
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)


def roi_for_model(rois: dict[str, RoiSpec], model: str) -> RoiSpec:
    if model in rois:
        return rois[model]
    if "default" in rois:
        base = rois["default"]
        return RoiSpec(document_model=model, rect=base.rect,
                       canonical_size=base.canonical_size)
    raise CatalogError(f"no ROI configured for document model {model!r}")


def frame_roi_image(clip: ClipRecord, frame_index: int,
                    rois: dict[str, RoiSpec]) -> np.ndarray:
    """scan -> rectify -> extract_roi for one frame; 256 x 256 uint8 RGB."""
    roi = roi_for_model(rois, clip.document_model)
    rectified = rectify_frame(clip.frames[frame_index], roi.canonical_size)
    return extract_roi(rectified, roi)


def make_roi_loader(rois: dict[str, RoiSpec], cache: bool = True):
    """Return a (clip, frame_index) -> ROI image callable with an optional cache.

    The cache is keyed by (clip_id, frame_index); training iterates the same
    frames every epoch, so caching avoids repeated disk reads and warps.
    """
    store: dict[tuple[str, int], np.ndarray] = {}

    def load(clip: ClipRecord, frame_index: int) -> np.ndarray:
        key = (clip.clip_id, frame_index)
        if cache and key in store:
            return store[key]
        img = frame_roi_image(clip, frame_index, rois)
        if cache:
            store[key] = img
        return img

    return load
