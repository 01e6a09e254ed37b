"""Shared fixtures: one small rendered dataset and a quick trained encoder.

The heavy pieces are session-scoped, rendered and trained exactly once;
test modules treat them as read-only.
"""

from __future__ import annotations

import sys

import pytest

from holocheck.catalog import load_roi_config, make_roi_loader, scan_dataset
from holocheck.encoder import TrainConfig, train
from holocheck.splits import clip_subsets, generate_splits
from holocheck.synthcam import SynthSpec, generate_dataset

SMALL_SPEC = SynthSpec(n_models=2, n_identities=3, frames_per_clip=8,
                       originals_per_identity=2)
SMALL_SEED = 7


@pytest.fixture(scope="session")
def small_root(tmp_path_factory):
    """Nuisance-free synthetic tree: 36 clips, 2 models x 3 identities."""
    root = tmp_path_factory.mktemp("smallset")
    return generate_dataset(SMALL_SPEC, root / "data", seed=SMALL_SEED)


@pytest.fixture(scope="session")
def small_clips(small_root):
    return scan_dataset(small_root, "synthetic")


@pytest.fixture(scope="session")
def small_rois(small_root):
    return load_roi_config(small_root / "roi.yaml")


@pytest.fixture(scope="session")
def small_roi_loader(small_rois):
    return make_roi_loader(small_rois)


@pytest.fixture(scope="session")
def small_subsets(small_clips):
    plan = generate_splits(small_clips, n_runs=3, seed=SMALL_SEED)[0]
    return clip_subsets(plan, small_clips)


@pytest.fixture(scope="session")
def smoke_encoder(small_subsets, small_roi_loader):
    """Two-epoch encoder on the small tree; enough to be non-degenerate."""
    cfg = TrainConfig(max_epochs=2, batch_size=8, seed=3)
    return train(small_subsets["train"], small_subsets["validation"], cfg,
                 small_roi_loader)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance gate, after the normal output."""
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None) if mod else None
    if not results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for num in sorted(results):
        terminalreporter.write_line(results[num])
