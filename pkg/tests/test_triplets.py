"""Triplet sampling, augmentation and epoch assembly."""

from __future__ import annotations

import numpy as np
import pytest
import torch

from helpers import fake_clip
from holocheck.triplets import (AugConfig, Triplet, augment_image,
                                augment_triplet, build_epoch, preprocess_image,
                                sample_attack_triplet, sample_original_triplet)

FAST_AUG = AugConfig(out_size=64)
NO_AUG = AugConfig(enabled=False, out_size=64)


def _originals(clips):
    return [c for c in clips if c.label == "original"]


def _attack_group(clips, model="model_00", identity="person_00"):
    return [c for c in clips if c.label == "attack"
            and c.document_model == model and c.identity == identity]


# ---------------------------------------------------------------------------
# sampling


def test_original_triplet_uses_consecutive_frames(small_clips,
                                                  small_roi_loader):
    clip = _originals(small_clips)[0]
    trip = sample_original_triplet(clip, 2, np.random.default_rng(0),
                                   small_roi_loader)
    assert trip.source_label == "original"
    prov = trip.provenance
    assert (prov.anchor_frame, prov.positive_frame, prov.negative_frame) \
        == (2, 2, 3)
    assert prov.anchor_clip == prov.negative_clip == clip.clip_id
    assert np.array_equal(trip.anchor, small_roi_loader(clip, 2))
    assert np.array_equal(trip.anchor, trip.positive)
    assert trip.positive is not trip.anchor  # independent buffers
    assert not np.array_equal(trip.anchor, trip.negative)


def test_original_triplet_random_frame_has_a_successor(small_clips,
                                                       small_roi_loader):
    clip = _originals(small_clips)[0]
    rng = np.random.default_rng(3)
    for _ in range(50):
        trip = sample_original_triplet(clip, None, rng, small_roi_loader)
        assert trip.provenance.anchor_frame < len(clip) - 1


def test_original_triplet_rejects_bad_inputs(small_clips, small_roi_loader):
    rng = np.random.default_rng(0)
    attack = next(c for c in small_clips if c.label == "attack")
    with pytest.raises(ValueError, match="not an original"):
        sample_original_triplet(attack, 0, rng, small_roi_loader)
    clip = _originals(small_clips)[0]
    with pytest.raises(ValueError, match="no successor"):
        sample_original_triplet(clip, len(clip) - 1, rng, small_roi_loader)
    short = fake_clip("s", "model_00", "person_00", "original", "none",
                      n_frames=1)
    with pytest.raises(ValueError, match="too short"):
        sample_original_triplet(short, None, rng, lambda c, t: c.frames[t].image)


def test_attack_triplet_pairs_two_clips_of_one_identity(small_clips,
                                                        small_roi_loader):
    group = _attack_group(small_clips)
    kinds = {c.clip_id: c.attack_kind for c in group}
    rng = np.random.default_rng(1)
    for _ in range(100):
        trip = sample_attack_triplet(group, rng, small_roi_loader)
        prov = trip.provenance
        assert trip.source_label == "attack"
        assert prov.anchor_clip == prov.positive_clip
        assert prov.negative_clip != prov.anchor_clip
        assert prov.identity == "person_00"
        # the replaced-photo forgery never contributes triplets
        assert kinds[prov.anchor_clip] != "photo_replacement"
        assert kinds[prov.negative_clip] != "photo_replacement"


def test_attack_triplet_rejects_bad_groups(small_clips, small_roi_loader):
    rng = np.random.default_rng(0)
    mixed = _attack_group(small_clips) \
        + _attack_group(small_clips, identity="person_01")
    with pytest.raises(ValueError, match="several identities"):
        sample_attack_triplet(mixed, rng, small_roi_loader)
    only_photo = [c for c in _attack_group(small_clips)
                  if c.attack_kind == "photo_replacement"]
    with pytest.raises(ValueError, match="insufficient"):
        sample_attack_triplet(only_photo, rng, small_roi_loader)


# ---------------------------------------------------------------------------
# augmentation


def _raw_triplet(small_clips, small_roi_loader, rng):
    clip = _originals(small_clips)[0]
    return sample_original_triplet(clip, 1, rng, small_roi_loader)


def test_disabled_augmentation_keeps_anchor_and_positive_identical(
        small_clips, small_roi_loader):
    raw = _raw_triplet(small_clips, small_roi_loader, np.random.default_rng(0))
    out = augment_triplet(raw, NO_AUG, np.random.default_rng(0))
    assert isinstance(out.anchor, torch.Tensor)
    assert out.anchor.shape == (3, 64, 64)
    assert out.anchor.dtype == torch.float32
    assert torch.equal(out.anchor, out.positive)
    assert not torch.equal(out.anchor, out.negative)


def test_augmentation_is_reproducible_under_a_seed(small_clips,
                                                   small_roi_loader):
    raw = _raw_triplet(small_clips, small_roi_loader, np.random.default_rng(0))
    a = augment_triplet(raw, FAST_AUG, np.random.default_rng(42))
    b = augment_triplet(raw, FAST_AUG, np.random.default_rng(42))
    c = augment_triplet(raw, FAST_AUG, np.random.default_rng(43))
    for img_a, img_b in [(a.anchor, b.anchor), (a.positive, b.positive),
                         (a.negative, b.negative)]:
        assert torch.equal(img_a, img_b)
    assert not all(torch.equal(x, y) for x, y in
                   [(a.anchor, c.anchor), (a.positive, c.positive)])


def test_geometric_draw_is_shared_across_the_triplet():
    img = np.random.default_rng(7).integers(0, 256, (80, 80, 3)).astype(np.uint8)
    trip = Triplet(anchor=img, positive=img.copy(), negative=img.copy(),
                   source_label="attack", provenance=None)
    cfg = AugConfig(geometric_prob=1.0, crop_prob=0.0, blur_prob=0.0,
                    jitter_prob=0.0, out_size=64)
    for seed in range(10):
        out = augment_triplet(trip, cfg, np.random.default_rng(seed))
        # identical inputs + shared op => identical outputs
        assert torch.equal(out.anchor, out.positive)
        assert torch.equal(out.anchor, out.negative)


def test_normalization_matches_the_closed_form():
    img = np.full((32, 48, 3), 128, np.uint8)
    tensor = preprocess_image(img, NO_AUG)
    assert tensor.shape == (3, 64, 64)
    from holocheck.triplets import IMAGENET_MEAN, IMAGENET_STD
    for ch in range(3):
        want = (128 / 255 - IMAGENET_MEAN[ch]) / IMAGENET_STD[ch]
        assert torch.allclose(tensor[ch], torch.full((64, 64), want),
                              atol=1e-6)


def test_single_image_augmentation_paths():
    img = np.random.default_rng(0).integers(0, 256, (60, 60, 3)).astype(np.uint8)
    plain = augment_image(img, NO_AUG, np.random.default_rng(0))
    assert torch.equal(plain, preprocess_image(img, NO_AUG))
    a = augment_image(img, FAST_AUG, np.random.default_rng(5))
    b = augment_image(img, FAST_AUG, np.random.default_rng(5))
    assert torch.equal(a, b)


def test_aug_config_validation():
    with pytest.raises(ValueError, match="probability"):
        AugConfig(blur_prob=1.5)
    with pytest.raises(ValueError, match="crop ratio"):
        AugConfig(crop_ratio=0.0)
    with pytest.raises(ValueError, match="odd"):
        AugConfig(blur_kernels=(4,))


# ---------------------------------------------------------------------------
# epoch assembly


def test_epoch_yields_one_triplet_per_source(small_subsets, small_roi_loader):
    train = small_subsets["train"]
    batches = list(build_epoch(train, FAST_AUG, 4, np.random.default_rng(0),
                               small_roi_loader))
    triplets = [t for b in batches for t in b]
    # 4 original clips + two 3-clip attack groups = 10 sources
    assert [len(b) for b in batches] == [4, 4, 2]
    labels = [t.source_label for t in triplets]
    assert labels.count("original") == 4
    assert labels.count("attack") == 6
    for t in triplets:
        assert t.anchor.shape == (3, 64, 64)


def test_epoch_is_deterministic(small_subsets, small_roi_loader):
    train = small_subsets["train"]
    runs = []
    for _ in range(2):
        batches = list(build_epoch(train, FAST_AUG, 4,
                                   np.random.default_rng(9), small_roi_loader))
        runs.append([t for b in batches for t in b])
    for t1, t2 in zip(runs[0], runs[1]):
        assert t1.provenance == t2.provenance
        assert torch.equal(t1.anchor, t2.anchor)
    other = [t for b in build_epoch(train, FAST_AUG, 4,
                                    np.random.default_rng(10),
                                    small_roi_loader) for t in b]
    assert [t.provenance for t in other] != [t.provenance for t in runs[0]]


def test_epoch_rejects_unusable_inputs(small_roi_loader):
    with pytest.raises(ValueError, match="batch size"):
        next(build_epoch([], FAST_AUG, 0, np.random.default_rng(0),
                         small_roi_loader))
    lonely = [fake_clip("a", "m", "p", "attack", "copy_without_holo")]
    with pytest.raises(ValueError, match="no usable triplet sources"):
        next(build_epoch(lonely, FAST_AUG, 4, np.random.default_rng(0),
                         small_roi_loader))
