"""Domain types shared by the whole package.

Images are plain numpy arrays, shape (H, W) or (H, W, 3), float values in
[0, 1].  Everything else is an immutable dataclass with JSON round-trip
helpers.  Image payloads serialize as content-addressed PNG references via
an ImageStore.
"""

from __future__ import annotations

import dataclasses
import hashlib
import io
import json
import os
import time
import uuid
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from PIL import Image


# ---------------------------------------------------------------------------
# images


def validate_image(img: np.ndarray) -> list[str]:
    """Return violation strings for an image array (empty list = ok)."""
    problems = []
    if not isinstance(img, np.ndarray):
        return ["image: not an ndarray"]
    if img.ndim not in (2, 3):
        problems.append("image: must be HxW or HxWxC")
    elif img.ndim == 3 and img.shape[2] not in (1, 3):
        problems.append("image: channels must be 1 or 3")
    if img.size and (np.nanmin(img) < 0.0 or np.nanmax(img) > 1.0):
        problems.append("image: values must lie in [0,1]")
    return problems


def quantize(img: np.ndarray) -> np.ndarray:
    """Snap to the 8-bit grid; PNG round-trips are exact afterwards."""
    return np.round(np.clip(img, 0.0, 1.0) * 255.0) / 255.0


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def from_uint8(raw: np.ndarray) -> np.ndarray:
    return raw.astype(np.float64) / 255.0


def encode_png(img: np.ndarray) -> bytes:
    arr = to_uint8(img)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    mode = "L" if arr.ndim == 2 else "RGB"
    buf = io.BytesIO()
    Image.fromarray(arr, mode=mode).save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB")
        return from_uint8(np.asarray(im))


def resample_image(img: np.ndarray, size: int) -> np.ndarray:
    """Resize to size x size (bilinear); channels preserved."""
    if img.shape[0] == size and img.shape[1] == size:
        return img
    arr = to_uint8(img)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    mode = "L" if arr.ndim == 2 else "RGB"
    im = Image.fromarray(arr, mode=mode).resize((size, size), Image.BILINEAR)
    return from_uint8(np.asarray(im))


class ImageStore:
    """Content-addressed PNG files under a directory."""

    def __init__(self, root: str):
        self.root = root
        os.makedirs(root, exist_ok=True)

    def put(self, img: np.ndarray) -> str:
        data = encode_png(img)
        digest = hashlib.sha256(data).hexdigest()[:24]
        path = os.path.join(self.root, digest + ".png")
        if not os.path.exists(path):
            tmp = path + ".tmp-" + uuid.uuid4().hex[:8]
            with open(tmp, "wb") as f:
                f.write(data)
            os.replace(tmp, path)
        return digest

    def path(self, ref: str) -> str:
        return os.path.join(self.root, ref + ".png")

    def get(self, ref: str) -> np.ndarray:
        with open(self.path(ref), "rb") as f:
            return decode_png(f.read())

    def has(self, ref: str) -> bool:
        return os.path.exists(self.path(ref))


# ---------------------------------------------------------------------------
# request model


@dataclass(frozen=True)
class InspirationImage:
    """One weighted, optionally cropped, inspiration image."""

    image: np.ndarray
    crop: Optional[tuple[int, int, int, int]] = None  # (x, y, w, h)
    weight: float = 1.0
    source: str = "user"  # "user" | "exemplar-dataset"
    id: str = field(default_factory=lambda: uuid.uuid4().hex[:12])

    def cropped(self) -> np.ndarray:
        if self.crop is None:
            return self.image
        x, y, w, h = self.crop
        return self.image[y : y + h, x : x + w]

    def violations(self, prefix: str = "inspiration") -> list[str]:
        out = [f"{prefix}.{v}" for v in validate_image(self.image)]
        if not (0.0 <= self.weight <= 1.0):
            out.append(f"{prefix}.weight: must be in [0,1]")
        if self.crop is not None:
            x, y, w, h = self.crop
            ih, iw = self.image.shape[:2]
            if w <= 0 or h <= 0:
                out.append(f"{prefix}.crop: must have positive area")
            elif x < 0 or y < 0 or x + w > iw or y + h > ih:
                out.append(f"{prefix}.crop: must lie inside the image")
        if self.source not in ("user", "exemplar-dataset"):
            out.append(f"{prefix}.source: unknown source {self.source!r}")
        return out


@dataclass(frozen=True)
class ConceptGroup:
    """A keyword plus its attached inspiration images."""

    keyword: str
    inspirations: tuple[InspirationImage, ...] = ()
    group_weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "keyword", self.keyword.strip().lower())
        object.__setattr__(self, "inspirations", tuple(self.inspirations))

    def violations(self, idx: int, max_images: Optional[int] = None) -> list[str]:
        prefix = f"concepts[{idx}]"
        out = []
        if not self.keyword:
            out.append(f"{prefix}.keyword: must be nonempty")
        if not (0.0 <= self.group_weight <= 1.0):
            out.append(f"{prefix}.group_weight: must be in [0,1]")
        if max_images is not None and len(self.inspirations) > max_images:
            out.append(f"{prefix}.inspirations: at most {max_images} images")
        for j, insp in enumerate(self.inspirations):
            out.extend(insp.violations(f"{prefix}.inspirations[{j}]"))
        return out


@dataclass(frozen=True)
class SymmetryConfig:
    enabled: bool = True
    k: int = 4
    center: Optional[tuple[float, float]] = None  # (row, col); None = canvas center
    radius: Optional[float] = None  # None = inscribed disc
    final_replication: bool = True

    def resolved_center(self, canvas: int) -> tuple[float, float]:
        if self.center is not None:
            return self.center
        return ((canvas - 1) / 2.0, (canvas - 1) / 2.0)

    def resolved_radius(self, canvas: int) -> float:
        if self.radius is not None:
            return self.radius
        r, c = self.resolved_center(canvas)
        return float(min(r, c, canvas - 1 - r, canvas - 1 - c))

    def violations(self, canvas: int) -> list[str]:
        out = []
        if self.enabled and self.k < 2:
            out.append("symmetry.k: must be >= 2")
        r, c = self.resolved_center(canvas)
        if not (0 <= r <= canvas - 1 and 0 <= c <= canvas - 1):
            out.append("symmetry.center: must lie inside the canvas")
        rad = self.resolved_radius(canvas)
        if rad < 0:
            out.append("symmetry.radius: must be nonnegative")
        elif rad > min(r, c, canvas - 1 - r, canvas - 1 - c) + 1e-9:
            out.append("symmetry.radius: circle must fit inside the canvas")
        return out


@dataclass(frozen=True)
class GenerationRequest:
    concepts: tuple[ConceptGroup, ...]
    symmetry: SymmetryConfig = SymmetryConfig()
    sketch: Optional[np.ndarray] = None
    template: Optional[np.ndarray] = None
    output_count: int = 1
    seed: int = 0
    backend_id: str = "stub-zero"
    sketch_strength: float = 0.6  # fraction of total steps kept when a sketch seeds the run

    def __post_init__(self):
        object.__setattr__(self, "concepts", tuple(self.concepts))

    def keywords(self) -> list[str]:
        return [g.keyword for g in self.concepts]


def validate_request(
    req: GenerationRequest,
    canvas: int,
    max_groups: Optional[int] = None,
    max_images_per_group: Optional[int] = None,
    known_backends: Optional[Sequence[str]] = None,
) -> list[str]:
    """Collect invariant violations; empty list means the request is valid.

    Violations are data, not exceptions: the service surfaces them as 422
    payloads and the CLI as exit-2 messages.
    """
    out: list[str] = []
    if not req.concepts:
        out.append("concepts: at least one required")
    if max_groups is not None and len(req.concepts) > max_groups:
        out.append(f"concepts: at most {max_groups} groups")
    for i, group in enumerate(req.concepts):
        out.extend(group.violations(i, max_images_per_group))
    if req.concepts and not any(g.keyword for g in req.concepts):
        out.append("concepts: at least one nonempty keyword required")
    out.extend(req.symmetry.violations(canvas))
    if req.output_count < 1:
        out.append("output_count: must be >= 1")
    if req.seed < 0:
        out.append("seed: must be nonnegative")
    if not (0.0 < req.sketch_strength <= 1.0):
        out.append("sketch_strength: must be in (0,1]")
    for name, img in (("sketch", req.sketch), ("template", req.template)):
        if img is None:
            continue
        probs = validate_image(img)
        out.extend(f"{name}: {p}" for p in probs)
        if not probs and (img.shape[0] != canvas or img.shape[1] != canvas):
            out.append(f"{name}: must match canvas size {canvas}x{canvas}")
        if not probs and img.shape[0] != img.shape[1]:
            out.append(f"{name}: must be square")
    if known_backends is not None and req.backend_id not in known_backends:
        out.append(f"backend_id: unknown backend {req.backend_id!r}")
    return out


# ---------------------------------------------------------------------------
# feedback / lineage


@dataclass(frozen=True)
class FeedbackDelta:
    added_inspirations: tuple[tuple[str, InspirationImage], ...] = ()
    removed_inspiration_ids: tuple[str, ...] = ()
    weight_changes: tuple[tuple[str, float], ...] = ()
    symmetry_change: Optional[SymmetryConfig] = None
    note: str = ""
    seed: Optional[int] = None  # pin the child seed; None draws a fresh one

    def __post_init__(self):
        object.__setattr__(self, "added_inspirations", tuple(self.added_inspirations))
        object.__setattr__(self, "removed_inspiration_ids", tuple(self.removed_inspiration_ids))
        object.__setattr__(self, "weight_changes", tuple(self.weight_changes))


class UnknownInspirationError(KeyError):
    pass


def apply_feedback(
    parent: GenerationRequest,
    delta: FeedbackDelta,
    rng: Optional[np.random.Generator] = None,
) -> GenerationRequest:
    """Produce the child request for a regeneration.

    Pure given (parent, delta) when delta pins a seed; otherwise the new
    seed comes from rng (or fresh OS entropy).  The parent is never
    modified.
    """
    known_ids = {i.id for g in parent.concepts for i in g.inspirations}
    for rid in delta.removed_inspiration_ids:
        if rid not in known_ids:
            raise UnknownInspirationError(f"removed id {rid!r} not in parent request")
    for wid, _ in delta.weight_changes:
        if wid not in known_ids:
            raise UnknownInspirationError(f"weight-change id {wid!r} not in parent request")

    removed = set(delta.removed_inspiration_ids)
    new_weights = dict(delta.weight_changes)
    added_by_kw: dict[str, list[InspirationImage]] = {}
    for kw, insp in delta.added_inspirations:
        added_by_kw.setdefault(kw.strip().lower(), []).append(insp)

    groups = []
    for g in parent.concepts:
        insps = []
        for insp in g.inspirations:
            if insp.id in removed:
                continue
            if insp.id in new_weights:
                insp = dataclasses.replace(insp, weight=new_weights[insp.id])
            insps.append(insp)
        insps.extend(added_by_kw.pop(g.keyword, []))
        groups.append(dataclasses.replace(g, inspirations=tuple(insps)))
    for kw, insps in added_by_kw.items():  # additions under a new keyword open a group
        groups.append(ConceptGroup(keyword=kw, inspirations=tuple(insps)))

    if delta.seed is not None:
        seed = delta.seed
    elif rng is not None:
        seed = int(rng.integers(0, 2**32))
    else:
        seed = int(np.random.default_rng().integers(0, 2**32))

    return dataclasses.replace(
        parent,
        concepts=tuple(groups),
        symmetry=delta.symmetry_change or parent.symmetry,
        seed=seed,
    )


@dataclass(frozen=True)
class GenerationRecord:
    id: str
    request: GenerationRequest
    outputs: tuple[str, ...] = ()  # image refs in the store
    parent_id: Optional[str] = None
    feedback: Optional[FeedbackDelta] = None
    created_at: float = field(default_factory=time.time)
    resolved_conditioning: Optional[dict] = None


# ---------------------------------------------------------------------------
# JSON serialization

_SOURCE_VALUES = ("user", "exemplar-dataset")


def _image_to_json(img: Optional[np.ndarray], store: Optional[ImageStore]):
    if img is None:
        return None
    if store is None:
        raise ValueError("an ImageStore is required to serialize images")
    return store.put(img)


def _image_from_json(ref, store: Optional[ImageStore]):
    if ref is None:
        return None
    if store is None:
        raise ValueError("an ImageStore is required to deserialize images")
    return store.get(ref)


def inspiration_to_json(insp: InspirationImage, store: ImageStore) -> dict:
    return {
        "id": insp.id,
        "image": _image_to_json(insp.image, store),
        "crop": list(insp.crop) if insp.crop else None,
        "weight": insp.weight,
        "source": insp.source,
    }


def inspiration_from_json(d: dict, store: ImageStore) -> InspirationImage:
    return InspirationImage(
        image=_image_from_json(d["image"], store),
        crop=tuple(d["crop"]) if d.get("crop") else None,
        weight=float(d.get("weight", 1.0)),
        source=d.get("source", "user"),
        id=d.get("id") or uuid.uuid4().hex[:12],
    )


def symmetry_to_json(sym: SymmetryConfig) -> dict:
    return {
        "enabled": sym.enabled,
        "k": sym.k,
        "center": list(sym.center) if sym.center else None,
        "radius": sym.radius,
        "final_replication": sym.final_replication,
    }


def symmetry_from_json(d: dict) -> SymmetryConfig:
    return SymmetryConfig(
        enabled=bool(d.get("enabled", True)),
        k=int(d.get("k", 4)),
        center=tuple(d["center"]) if d.get("center") else None,
        radius=d.get("radius"),
        final_replication=bool(d.get("final_replication", True)),
    )


def request_to_json(req: GenerationRequest, store: ImageStore) -> dict:
    return {
        "concepts": [
            {
                "keyword": g.keyword,
                "group_weight": g.group_weight,
                "inspirations": [inspiration_to_json(i, store) for i in g.inspirations],
            }
            for g in req.concepts
        ],
        "symmetry": symmetry_to_json(req.symmetry),
        "sketch": _image_to_json(req.sketch, store),
        "template": _image_to_json(req.template, store),
        "output_count": req.output_count,
        "seed": req.seed,
        "backend_id": req.backend_id,
        "sketch_strength": req.sketch_strength,
    }


def request_from_json(d: dict, store: ImageStore) -> GenerationRequest:
    return GenerationRequest(
        concepts=tuple(
            ConceptGroup(
                keyword=g["keyword"],
                group_weight=float(g.get("group_weight", 1.0)),
                inspirations=tuple(
                    inspiration_from_json(i, store) for i in g.get("inspirations", [])
                ),
            )
            for g in d.get("concepts", [])
        ),
        symmetry=symmetry_from_json(d.get("symmetry", {})),
        sketch=_image_from_json(d.get("sketch"), store),
        template=_image_from_json(d.get("template"), store),
        output_count=int(d.get("output_count", 1)),
        seed=int(d.get("seed", 0)),
        backend_id=d.get("backend_id", "stub-zero"),
        sketch_strength=float(d.get("sketch_strength", 0.6)),
    )


def feedback_to_json(delta: FeedbackDelta, store: ImageStore) -> dict:
    return {
        "added_inspirations": [
            [kw, inspiration_to_json(i, store)] for kw, i in delta.added_inspirations
        ],
        "removed_inspiration_ids": list(delta.removed_inspiration_ids),
        "weight_changes": [[i, w] for i, w in delta.weight_changes],
        "symmetry_change": symmetry_to_json(delta.symmetry_change)
        if delta.symmetry_change
        else None,
        "note": delta.note,
        "seed": delta.seed,
    }


def feedback_from_json(d: dict, store: ImageStore) -> FeedbackDelta:
    return FeedbackDelta(
        added_inspirations=tuple(
            (kw, inspiration_from_json(i, store)) for kw, i in d.get("added_inspirations", [])
        ),
        removed_inspiration_ids=tuple(d.get("removed_inspiration_ids", [])),
        weight_changes=tuple((i, float(w)) for i, w in d.get("weight_changes", [])),
        symmetry_change=symmetry_from_json(d["symmetry_change"])
        if d.get("symmetry_change")
        else None,
        note=d.get("note", ""),
        seed=d.get("seed"),
    )


def record_to_json(rec: GenerationRecord, store: ImageStore) -> dict:
    return {
        "id": rec.id,
        "request": request_to_json(rec.request, store),
        "outputs": list(rec.outputs),
        "parent_id": rec.parent_id,
        "feedback": feedback_to_json(rec.feedback, store) if rec.feedback else None,
        "created_at": rec.created_at,
        "resolved_conditioning": rec.resolved_conditioning,
    }


def record_from_json(d: dict, store: ImageStore) -> GenerationRecord:
    return GenerationRecord(
        id=d["id"],
        request=request_from_json(d["request"], store),
        outputs=tuple(d.get("outputs", [])),
        parent_id=d.get("parent_id"),
        feedback=feedback_from_json(d["feedback"], store) if d.get("feedback") else None,
        created_at=float(d.get("created_at", 0.0)),
        resolved_conditioning=d.get("resolved_conditioning"),
    )


def dump_json(obj: dict) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)
