"""Identity-disjoint train/validation/test splits, stratified by model.

Every (document_model, identity) pair is assigned to exactly one subset.
Per run, each model contributes exactly one test identity chosen by a
rotation over its sorted identities, so five runs cover five identities;
80% of the models (seeded choice) each donate one validation identity from
the remainder. Photo-replacement clips are special: they only ever appear
in the test subset, and only for test identities; for train or validation
identities they are dropped outright.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .catalog import ClipRecord

log = logging.getLogger(__name__)

SUBSETS = ("train", "validation", "test")
SPLIT_FILE_VERSION = 1


@dataclass
class SplitPlan:
    """Assignment of every (model, identity) pair to one subset for one run."""

    run_id: int
    seed: int
    assignment: dict[tuple[str, str], str] = field(default_factory=dict)

    def __post_init__(self):
        for key, subset in self.assignment.items():
            if subset not in SUBSETS:
                raise ValueError(f"unknown subset {subset!r} for {key}")

    def identities(self, subset: str) -> list[tuple[str, str]]:
        return sorted(k for k, s in self.assignment.items() if s == subset)


def _group_identities(clips: list[ClipRecord]) -> dict[str, list[str]]:
    by_model: dict[str, set[str]] = {}
    for clip in clips:
        by_model.setdefault(clip.document_model, set()).add(clip.identity)
    return {m: sorted(ids) for m, ids in sorted(by_model.items())}


def generate_splits(clips: list[ClipRecord], n_runs: int,
                    seed: int) -> list[SplitPlan]:
    """Build ``n_runs`` deterministic identity-disjoint splits."""
    if not clips:
        raise ValueError("empty catalog")
    by_model = _group_identities(clips)
    for model, idents in by_model.items():
        if len(idents) < 2:
            raise ValueError(
                f"cannot stratify: model {model!r} has {len(idents)} identity")
    models = sorted(by_model)
    n_donors = round(0.8 * len(models))

    plans = []
    for run_id in range(n_runs):
        rng = np.random.default_rng(np.random.SeedSequence([seed, run_id]))
        donor_ranks = set(
            rng.choice(len(models), size=n_donors, replace=False).tolist())
        assignment: dict[tuple[str, str], str] = {}
        for rank, model in enumerate(models):
            idents = by_model[model]
            test_ident = idents[(rank + run_id) % len(idents)]
            remaining = [i for i in idents if i != test_ident]
            val_ident = None
            if rank in donor_ranks:
                val_ident = remaining[int(rng.integers(len(remaining)))]
            for ident in idents:
                if ident == test_ident:
                    assignment[(model, ident)] = "test"
                elif ident == val_ident:
                    assignment[(model, ident)] = "validation"
                else:
                    assignment[(model, ident)] = "train"
        plans.append(SplitPlan(run_id=run_id, seed=seed,
                               assignment=assignment))
    return plans


def clip_subsets(plan: SplitPlan,
                 clips: list[ClipRecord]) -> dict[str, list[ClipRecord]]:
    """Materialize the subsets, applying the photo-replacement rules."""
    out: dict[str, list[ClipRecord]] = {s: [] for s in SUBSETS}
    dropped = 0
    for clip in clips:
        key = (clip.document_model, clip.identity)
        try:
            subset = plan.assignment[key]
        except KeyError:
            raise ValueError(f"clip {clip.clip_id!r} not covered by split "
                             f"(model, identity) = {key}") from None
        if clip.attack_kind == "photo_replacement" and subset != "test":
            dropped += 1
            continue
        out[subset].append(clip)
    if dropped:
        log.debug("dropped %d photo_replacement clips outside test", dropped)
    return out


# ---------------------------------------------------------------------------
# split files


def save_split(plan: SplitPlan, path: Path | str) -> None:
    lines = [f"version {SPLIT_FILE_VERSION}",
             f"run_id {plan.run_id}",
             f"seed {plan.seed}"]
    for (model, ident) in sorted(plan.assignment):
        lines.append(f"{model}\t{ident}\t{plan.assignment[(model, ident)]}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_split(path: Path | str) -> SplitPlan:
    lines = Path(path).read_text().splitlines()
    if len(lines) < 3 or not lines[0].startswith("version "):
        raise ValueError(f"not a split file: {path}")
    version = int(lines[0].split()[1])
    if version != SPLIT_FILE_VERSION:
        raise ValueError(f"unsupported split file version {version}")
    run_id = int(lines[1].split()[1])
    seed = int(lines[2].split()[1])
    assignment = {}
    for line in lines[3:]:
        if not line.strip():
            continue
        model, ident, subset = line.split("\t")
        assignment[(model, ident)] = subset
    return SplitPlan(run_id=run_id, seed=seed, assignment=assignment)
