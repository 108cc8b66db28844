"""Annotation votes, top-percent exemplar aggregation, and the labeled image
store backing fallback sampling.

Aggregation rule: within the pool of wheels holding at least ``min_votes``
votes, take the top 5% by vote count; ties at the threshold expand the set.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .core import decode_png, encode_png


# ---------------------------------------------------------------------------
# votes


@dataclass(frozen=True)
class AnnotationTask:
    keyword: str
    candidate_wheel_ids: tuple[str, ...]
    selections_per_rater: int = 10

    def __post_init__(self):
        object.__setattr__(self, "candidate_wheel_ids", tuple(self.candidate_wheel_ids))
        if self.selections_per_rater > len(self.candidate_wheel_ids):
            raise ValueError("selections_per_rater exceeds candidate count")


@dataclass(frozen=True)
class VoteMatrix:
    keyword: str
    counts: dict = field(default_factory=dict)  # wheel_id -> votes
    rater_count: int = 0
    raters: frozenset = frozenset()


class VoteError(ValueError):
    pass


def record_vote(
    task: AnnotationTask, votes: VoteMatrix, rater_id: str, selected_ids: Sequence[str]
) -> VoteMatrix:
    """Apply one rater's selections; duplicate raters and wrong selection
    counts are rejected."""
    if rater_id in votes.raters:
        raise VoteError(f"rater {rater_id!r} already voted on {task.keyword!r}")
    selected = list(selected_ids)
    if len(set(selected)) != len(selected):
        raise VoteError("duplicate wheel ids in selection")
    if len(selected) != task.selections_per_rater:
        raise VoteError(
            f"expected {task.selections_per_rater} selections, got {len(selected)}"
        )
    unknown = [s for s in selected if s not in task.candidate_wheel_ids]
    if unknown:
        raise VoteError(f"ids not in task: {unknown}")
    counts = dict(votes.counts)
    for wid in selected:
        counts[wid] = counts.get(wid, 0) + 1
    return replace(
        votes,
        counts=counts,
        rater_count=votes.rater_count + 1,
        raters=votes.raters | {rater_id},
    )


@dataclass(frozen=True)
class ExemplarSet:
    keyword: str
    wheel_ids: tuple[str, ...]
    threshold_votes: int
    percentile: float


def aggregate_top_percent(
    votes: VoteMatrix, percentile: float = 0.05, min_votes: int = 1
) -> ExemplarSet:
    """Top-``percentile`` most chosen wheels, tie-inclusive.

    Pool = wheels with >= min_votes.  target = ceil(percentile * pool size);
    the threshold is the target-th highest count, and every wheel at or
    above it is included, so ties can expand the set.
    """
    pool = {w: c for w, c in votes.counts.items() if c >= min_votes}
    if not pool:
        raise VoteError("no wheels with enough votes to aggregate")
    target = max(1, math.ceil(percentile * len(pool)))
    ranked = sorted(pool.items(), key=lambda item: (-item[1], item[0]))
    threshold = ranked[target - 1][1]
    members = tuple(w for w, c in ranked if c >= threshold)
    return ExemplarSet(
        keyword=votes.keyword,
        wheel_ids=members,
        threshold_votes=threshold,
        percentile=percentile,
    )


# ---------------------------------------------------------------------------
# labeled image store


class ExemplarStore:
    """Directory of PNGs plus one JSON manifest (id, kind, labels, params).

    ``kind`` is "wheel" for wheel-design images (template fallback) or
    "inspiration" for stylistic images (context fallback).
    """

    MANIFEST = "manifest.json"

    def __init__(self, root: str):
        self.root = root
        os.makedirs(root, exist_ok=True)
        self._manifest: dict = {"version": 1, "images": {}}
        path = os.path.join(root, self.MANIFEST)
        if os.path.exists(path):
            with open(path) as f:
                self._manifest = json.load(f)

    def _save_manifest(self) -> None:
        path = os.path.join(self.root, self.MANIFEST)
        tmp = path + ".tmp"
        with open(tmp, "w") as f:
            json.dump(self._manifest, f, indent=2, sort_keys=True)
        os.replace(tmp, path)

    def __len__(self) -> int:
        return len(self._manifest["images"])

    def ids(self) -> list[str]:
        return sorted(self._manifest["images"])

    def add(
        self,
        img: np.ndarray,
        labels: Sequence[str],
        kind: str = "wheel",
        params: Optional[dict] = None,
        image_id: Optional[str] = None,
    ) -> str:
        if kind not in ("wheel", "inspiration"):
            raise ValueError(f"unknown kind {kind!r}")
        if image_id is None:
            image_id = f"{kind[0]}{len(self._manifest['images']):06d}"
        with open(os.path.join(self.root, image_id + ".png"), "wb") as f:
            f.write(encode_png(img))
        self._manifest["images"][image_id] = {
            "kind": kind,
            "labels": sorted(set(label.strip().lower() for label in labels)),
            "params": params or {},
        }
        self._save_manifest()
        return image_id

    def get(self, image_id: str) -> np.ndarray:
        with open(os.path.join(self.root, image_id + ".png"), "rb") as f:
            return decode_png(f.read())

    def meta(self, image_id: str) -> dict:
        return self._manifest["images"][image_id]

    def labels(self) -> list[str]:
        out = set()
        for meta in self._manifest["images"].values():
            out.update(meta["labels"])
        return sorted(out)

    def ids_for(self, keyword: str, kind: Optional[str] = None) -> list[str]:
        kw = keyword.strip().lower()
        return sorted(
            i
            for i, meta in self._manifest["images"].items()
            if kw in meta["labels"] and (kind is None or meta["kind"] == kind)
        )

    def _sample(self, keyword: str, kind: str, n: int, rng: np.random.Generator):
        ids = self.ids_for(keyword, kind)
        if not ids:
            return []
        chosen = rng.choice(len(ids), size=min(n, len(ids)), replace=False)
        return [(ids[i], self.get(ids[i])) for i in sorted(chosen)]

    def sample_inspirations(self, keyword: str, n: int, rng: np.random.Generator):
        """Up to n inspiration images for the keyword, without replacement;
        falls back to wheel images when no dedicated inspirations exist."""
        picked = self._sample(keyword, "inspiration", n, rng)
        if picked:
            return picked
        return self._sample(keyword, "wheel", n, rng)

    def sample_wheels(self, keyword: str, n: int, rng: np.random.Generator):
        return self._sample(keyword, "wheel", n, rng)

    def import_folder(self, directory: str, labels_csv: str, kind: str = "inspiration") -> list[str]:
        """Import a folder of images with a CSV of ``filename,label1;label2``."""
        added = []
        with open(labels_csv) as f:
            for row in csv.reader(f):
                if not row or row[0].startswith("#"):
                    continue
                fname, labels = row[0].strip(), row[1] if len(row) > 1 else ""
                with open(os.path.join(directory, fname), "rb") as imgf:
                    img = decode_png(imgf.read())
                added.append(
                    self.add(img, [s for s in labels.split(";") if s.strip()], kind=kind)
                )
        return added
